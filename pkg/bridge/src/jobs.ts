import { BridgeError } from "./errors.js";
import { writeEmb1 } from "./emb1.js";
import { readEpochStore } from "./epochStore.js";
import { LORA_DEFAULTS, LoraConfig, adaptCheckpoint, trainableFraction } from "./lora.js";
import { channelRows, classify, embed, embeddingDim, loadCheckpoint } from "./model.js";
import { writePredictions } from "./predictions.js";

export const MODEL_TAGS = ["labram", "cbramod", "csbrain"] as const;
export type ModelTag = (typeof MODEL_TAGS)[number];

export type Adaptation =
  | { kind: "frozen" }
  | { kind: "full_ft" }
  | { kind: "lora"; r: number; alpha: number };

export interface BridgeJob {
  modelTag: ModelTag;
  checkpoint: string;
  adaptation: Adaptation;
  epochStore: string;
  out: string;
}

export function parseAdaptation(text: string): Adaptation {
  if (text === "frozen" || text === "full_ft") return { kind: text };
  const match = /^lora(?:\((\d+),(\d+)\))?$/.exec(text);
  if (match) {
    return {
      kind: "lora",
      r: match[1] ? Number(match[1]) : LORA_DEFAULTS.r,
      alpha: match[2] ? Number(match[2]) : LORA_DEFAULTS.alpha,
    };
  }
  throw new BridgeError(`unknown adaptation "${text}"`);
}

export interface JobResult {
  out: string;
  nEpochs: number;
  trainableFraction?: number;
}

/** frozen -> EMB1 embeddings; full_ft / lora -> predictions CSV. */
export function runJob(job: BridgeJob, log: (line: string) => void = console.error): JobResult {
  if (!MODEL_TAGS.includes(job.modelTag)) {
    throw new BridgeError(`unknown model tag ${job.modelTag}`);
  }
  const ckpt = loadCheckpoint(job.checkpoint);
  const store = readEpochStore(job.epochStore);
  const rows = channelRows(ckpt, store);
  const n = store.epochs.length;

  if (job.adaptation.kind === "frozen") {
    const d = embeddingDim(ckpt);
    const features = new Float32Array(n * d);
    const labels = new Int32Array(n);
    const epochIds: number[] = [];
    for (let i = 0; i < n; i++) {
      const vec = embed(ckpt, store, i, rows);
      features.set(vec, i * d);
      labels[i] = store.epochs[i].label;
      epochIds.push(store.epochs[i].epoch_id);
    }
    writeEmb1(job.out, {
      features,
      labels,
      epochIds,
      d,
      nClasses: store.nClasses,
      subjectIds: store.epochs.map(e => e.subject_id),
      modelTag: job.modelTag,
      datasetId: store.datasetId,
    });
    log(`${job.modelTag}: wrote ${n} embeddings (d=${d}) to ${job.out}`);
    return { out: job.out, nEpochs: n };
  }

  let layers = ckpt.layers;
  let head = ckpt.head;
  let fraction: number | undefined;
  if (job.adaptation.kind === "lora") {
    const cfg: LoraConfig = { r: job.adaptation.r, alpha: job.adaptation.alpha };
    fraction = trainableFraction(ckpt, cfg.r);
    log(
      `${job.modelTag}: lora(r=${cfg.r},alpha=${cfg.alpha}) trainable fraction ` +
        fraction.toFixed(4),
    );
    if (fraction < 0.02 || fraction > 0.06) {
      throw new BridgeError(
        `lora trainable fraction ${fraction.toFixed(4)} outside [0.02, 0.06]`,
      );
    }
    ({ layers, head } = adaptCheckpoint(ckpt, cfg));
  }

  const proba: number[][] = [];
  const epochIds: number[] = [];
  const labels: number[] = [];
  for (let i = 0; i < n; i++) {
    proba.push(classify(head, embed(ckpt, store, i, rows, layers)));
    epochIds.push(store.epochs[i].epoch_id);
    labels.push(store.epochs[i].label);
  }
  writePredictions(job.out, epochIds, labels, proba);
  log(`${job.modelTag}: wrote ${n} prediction rows to ${job.out}`);
  return { out: job.out, nEpochs: n, trainableFraction: fraction };
}
