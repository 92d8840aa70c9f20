import { readFileSync, writeFileSync } from "node:fs";

import { EpochStore, epochData } from "./epochStore.js";
import { BridgeError, ChannelSetUnsupported } from "./errors.js";
import { gaussian, mulberry32 } from "./rng.js";

export interface LinearLayer {
  /** out x in, row-major */
  w: number[][];
  b: number[];
}

/**
 * A small feed-forward backbone stored as JSON: the epoch's channels are
 * mean-pooled into `poolBins` time bins, flattened, pushed through tanh
 * linear layers, and the last layer's output is the embedding. A separate
 * classifier head maps embeddings to class logits.
 */
export interface Checkpoint {
  model_tag: string;
  channels: string[];
  pool_bins: number;
  layers: LinearLayer[];
  head: LinearLayer;
}

export function loadCheckpoint(path: string): Checkpoint {
  const ckpt = JSON.parse(readFileSync(path, "utf-8")) as Checkpoint;
  if (!ckpt.layers?.length || !ckpt.channels?.length || !ckpt.head) {
    throw new BridgeError(`${path}: not a bridge checkpoint`);
  }
  return ckpt;
}

export function embeddingDim(ckpt: Checkpoint): number {
  return ckpt.layers[ckpt.layers.length - 1].b.length;
}

export function parameterCount(layers: LinearLayer[]): number {
  return layers.reduce((n, l) => n + l.w.length * l.w[0].length + l.b.length, 0);
}

function matVec(layer: LinearLayer, x: number[]): number[] {
  const out = new Array<number>(layer.b.length);
  for (let i = 0; i < layer.b.length; i++) {
    let acc = layer.b[i];
    const row = layer.w[i];
    for (let j = 0; j < row.length; j++) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

/** Row indices of the checkpoint's channels within the store's montage. */
export function channelRows(ckpt: Checkpoint, store: EpochStore): number[] {
  const missing = ckpt.channels.filter(ch => !store.channels.includes(ch));
  if (missing.length > 0) {
    throw new ChannelSetUnsupported(
      `${ckpt.model_tag} needs channels [${missing.join(", ")}] ` +
        `absent from montage [${store.channels.join(", ")}]`,
    );
  }
  return ckpt.channels.map(ch => store.channels.indexOf(ch));
}

/** Mean-pool each selected channel into pool_bins bins, then flatten. */
export function pooledInput(
  ckpt: Checkpoint,
  store: EpochStore,
  index: number,
  rows: number[],
): number[] {
  const [, , t] = store.shape;
  const data = epochData(store, index);
  const out = new Array<number>(rows.length * ckpt.pool_bins);
  for (let r = 0; r < rows.length; r++) {
    const base = rows[r] * t;
    for (let bin = 0; bin < ckpt.pool_bins; bin++) {
      const lo = Math.floor((bin * t) / ckpt.pool_bins);
      const hi = Math.floor(((bin + 1) * t) / ckpt.pool_bins);
      let acc = 0;
      for (let s = lo; s < hi; s++) acc += data[base + s];
      out[r * ckpt.pool_bins + bin] = acc / Math.max(hi - lo, 1);
    }
  }
  return out;
}

/** Flattened backbone output for one epoch. */
export function embed(
  ckpt: Checkpoint,
  store: EpochStore,
  index: number,
  rows: number[],
  layers: LinearLayer[] = ckpt.layers,
): number[] {
  let x = pooledInput(ckpt, store, index, rows);
  for (let i = 0; i < layers.length; i++) {
    x = matVec(layers[i], x);
    if (i < layers.length - 1) x = x.map(Math.tanh);
  }
  return x;
}

/** Class probabilities from the classifier head via a stable softmax. */
export function classify(head: LinearLayer, embedding: number[]): number[] {
  const logits = matVec(head, embedding);
  const peak = Math.max(...logits);
  const exps = logits.map(z => Math.exp(z - peak));
  const total = exps.reduce((a, b) => a + b, 0);
  return exps.map(e => e / total);
}

function randomLayer(nOut: number, nIn: number, rand: () => number): LinearLayer {
  const scale = 1 / Math.sqrt(nIn);
  return {
    w: Array.from({ length: nOut }, () =>
      Array.from({ length: nIn }, () => gaussian(rand) * scale),
    ),
    b: Array.from({ length: nOut }, () => gaussian(rand) * 0.01),
  };
}

/**
 * Deterministic synthetic checkpoint for desk-scale runs; hidden widths are
 * sized so lora(r=4) adapters land in the published trainable-fraction band.
 */
export function makeCheckpoint(
  path: string,
  modelTag: string,
  channels: string[],
  options: { poolBins?: number; hidden?: number; embedDim?: number; nClasses?: number; seed?: number } = {},
): Checkpoint {
  const poolBins = options.poolBins ?? 8;
  const hidden = options.hidden ?? 256;
  const embedDim = options.embedDim ?? 64;
  const nClasses = options.nClasses ?? 2;
  const rand = mulberry32(options.seed ?? 0);
  const inputDim = channels.length * poolBins;
  const ckpt: Checkpoint = {
    model_tag: modelTag,
    channels,
    pool_bins: poolBins,
    layers: [
      randomLayer(hidden, inputDim, rand),
      randomLayer(hidden, hidden, rand),
      randomLayer(embedDim, hidden, rand),
    ],
    head: randomLayer(nClasses, embedDim, rand),
  };
  writeFileSync(path, JSON.stringify(ckpt));
  return ckpt;
}
