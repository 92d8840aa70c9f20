import { writeFileSync } from "node:fs";

import { BridgeError } from "./errors.js";

/**
 * Writes the harness's predictions CSV: epoch_id,true_label,p_0..p_{K-1}.
 * Every row is renormalized so its probabilities sum to 1 well within the
 * harness's 1e-6 acceptance window.
 */
export function writePredictions(
  path: string,
  epochIds: number[],
  labels: Int32Array | number[],
  proba: number[][],
): void {
  if (proba.length !== epochIds.length) {
    throw new BridgeError(
      `${proba.length} probability rows for ${epochIds.length} epochs`,
    );
  }
  const k = proba[0].length;
  const lines = [
    "epoch_id,true_label," +
      Array.from({ length: k }, (_, j) => `p_${j}`).join(","),
  ];
  for (let i = 0; i < proba.length; i++) {
    const row = proba[i];
    const total = row.reduce((a, b) => a + b, 0);
    if (!(total > 0)) {
      throw new BridgeError(`row ${i}: probabilities sum to ${total}`);
    }
    const cells = row.map(p => String(p / total)).join(",");
    lines.push(`${epochIds[i]},${labels[i]},${cells}`);
  }
  writeFileSync(path, lines.join("\n") + "\n");
}
