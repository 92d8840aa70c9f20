import { Checkpoint, LinearLayer, parameterCount } from "./model.js";
import { gaussian, mulberry32 } from "./rng.js";

export interface LoraConfig {
  r: number;
  alpha: number;
  seed?: number;
}

/** Published low-rank adaptation setting. */
export const LORA_DEFAULTS: LoraConfig = { r: 4, alpha: 8 };

/**
 * Injects a low-rank update W + B.A.(alpha/r) into one linear layer. A is
 * drawn from a small gaussian and B starts at zero in real fine-tuning; here
 * both are seeded draws standing in for trained adapter weights.
 */
export function applyLora(
  layer: LinearLayer,
  cfg: LoraConfig,
  rand: () => number,
): LinearLayer {
  const nOut = layer.w.length;
  const nIn = layer.w[0].length;
  const a = Array.from({ length: cfg.r }, () =>
    Array.from({ length: nIn }, () => gaussian(rand) * 0.02),
  );
  const b = Array.from({ length: nOut }, () =>
    Array.from({ length: cfg.r }, () => gaussian(rand) * 0.02),
  );
  const scale = cfg.alpha / cfg.r;
  const w = layer.w.map((row, i) =>
    row.map((value, j) => {
      let delta = 0;
      for (let k = 0; k < cfg.r; k++) delta += b[i][k] * a[k][j];
      return value + delta * scale;
    }),
  );
  return { w, b: [...layer.b] };
}

/** r*(in+out) trainable adapter weights per linear layer, over all weights. */
export function trainableFraction(ckpt: Checkpoint, r: number): number {
  const linear = [...ckpt.layers, ckpt.head];
  const trainable = linear.reduce(
    (n, l) => n + r * (l.w[0].length + l.w.length),
    0,
  );
  return trainable / parameterCount(linear);
}

/** All linear layers (backbone + head) with adapters merged in. */
export function adaptCheckpoint(
  ckpt: Checkpoint,
  cfg: LoraConfig,
): { layers: LinearLayer[]; head: LinearLayer } {
  const rand = mulberry32(cfg.seed ?? 1);
  return {
    layers: ckpt.layers.map(l => applyLora(l, cfg, rand)),
    head: applyLora(ckpt.head, cfg, rand),
  };
}
