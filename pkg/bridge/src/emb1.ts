import { writeFileSync } from "node:fs";

import { BridgeError } from "./errors.js";

export interface EmbeddingExport {
  /** n x d row-major */
  features: Float32Array;
  labels: Int32Array;
  epochIds: number[];
  d: number;
  nClasses: number;
  subjectIds: string[];
  modelTag: string;
  datasetId: string;
}

const MAGIC = Buffer.from("EMB1", "ascii");

/**
 * Serializes embeddings into the harness's EMB1 layout: magic, u32 version=1,
 * u32 n, u32 d, u32 K, then n records of (u64 epoch_id, i32 label, d x f32),
 * all little-endian, plus a JSON sidecar with subject ids and tags.
 */
export function writeEmb1(path: string, exp: EmbeddingExport): void {
  const n = exp.epochIds.length;
  if (exp.features.length !== n * exp.d || exp.labels.length !== n) {
    throw new BridgeError(
      `inconsistent export: ${n} epochs, ${exp.labels.length} labels, ` +
        `${exp.features.length} feature values for d=${exp.d}`,
    );
  }
  const record = 8 + 4 + 4 * exp.d;
  const buf = Buffer.alloc(20 + n * record);
  MAGIC.copy(buf, 0);
  buf.writeUInt32LE(1, 4);
  buf.writeUInt32LE(n, 8);
  buf.writeUInt32LE(exp.d, 12);
  buf.writeUInt32LE(exp.nClasses, 16);
  for (let i = 0; i < n; i++) {
    const off = 20 + i * record;
    buf.writeBigInt64LE(BigInt(exp.epochIds[i]), off);
    buf.writeInt32LE(exp.labels[i], off + 8);
    for (let j = 0; j < exp.d; j++) {
      buf.writeFloatLE(exp.features[i * exp.d + j], off + 12 + 4 * j);
    }
  }
  writeFileSync(path, buf);
  const sidecar = {
    subject_ids: exp.subjectIds,
    model_tag: exp.modelTag,
    dataset_id: exp.datasetId,
  };
  // sorted keys to match the harness's canonical sidecar rendering
  writeFileSync(
    `${path}.meta.json`,
    JSON.stringify(sidecar, Object.keys(sidecar).sort(), 2),
  );
}
