import { readFileSync } from "node:fs";
import { join } from "node:path";

import { BridgeError } from "./errors.js";

export interface EpochMeta {
  epoch_id: number;
  subject_id: string;
  label: number;
  t_start_s: number;
}

export interface EpochStore {
  datasetId: string;
  nClasses: number;
  channels: string[];
  fsHz: number;
  /** [n, channels, samples] */
  shape: [number, number, number];
  epochs: EpochMeta[];
  /** n x C x T row-major float32 */
  data: Float32Array;
}

/** Reads the harness's epoch-store directory (meta.json + epochs.f32). */
export function readEpochStore(dir: string): EpochStore {
  const meta = JSON.parse(readFileSync(join(dir, "meta.json"), "utf-8"));
  const raw = readFileSync(join(dir, "epochs.f32"));
  const [n, c, t] = meta.shape as [number, number, number];
  if (raw.byteLength !== n * c * t * 4) {
    throw new BridgeError(
      `${dir}: epochs.f32 is ${raw.byteLength} bytes, meta.json implies ${n * c * t * 4}`,
    );
  }
  const data = new Float32Array(raw.buffer, raw.byteOffset, n * c * t);
  return {
    datasetId: meta.dataset_id,
    nClasses: meta.n_classes,
    channels: meta.channels,
    fsHz: meta.fs_hz,
    shape: [n, c, t],
    epochs: meta.epochs,
    data,
  };
}

/** One epoch's C x T block as a view into the store buffer. */
export function epochData(store: EpochStore, index: number): Float32Array {
  const [, c, t] = store.shape;
  return store.data.subarray(index * c * t, (index + 1) * c * t);
}
