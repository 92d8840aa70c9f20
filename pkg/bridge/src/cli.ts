#!/usr/bin/env node
import { parseArgs } from "node:util";

import { BridgeError } from "./errors.js";
import { BridgeJob, ModelTag, parseAdaptation, runJob } from "./jobs.js";
import { makeCheckpoint } from "./model.js";

const USAGE = `usage:
  eegbench-bridge make-checkpoint --model <tag> --channels Fz,Cz,... --out ckpt.json
      [--hidden 256] [--embed-dim 64] [--n-classes 2] [--seed 0]
  eegbench-bridge export-embeddings --model <tag> --checkpoint ckpt.json
      --store <epoch-store-dir> --out file.emb1
  eegbench-bridge export-predictions --model <tag> --checkpoint ckpt.json
      --store <epoch-store-dir> --adaptation full_ft|lora|lora(r,alpha) --out preds.csv`;

function fail(message: string): never {
  console.error(`error: ${message}`);
  console.error(USAGE);
  process.exit(2);
}

export function main(argv: string[]): void {
  const [command, ...rest] = argv;
  const { values } = parseArgs({
    args: rest,
    options: {
      model: { type: "string" },
      channels: { type: "string" },
      checkpoint: { type: "string" },
      store: { type: "string" },
      adaptation: { type: "string" },
      out: { type: "string" },
      hidden: { type: "string" },
      "embed-dim": { type: "string" },
      "n-classes": { type: "string" },
      seed: { type: "string" },
    },
  });
  if (!values.model || !values.out) fail("--model and --out are required");

  if (command === "make-checkpoint") {
    if (!values.channels) fail("--channels is required");
    makeCheckpoint(values.out, values.model, values.channels.split(","), {
      hidden: values.hidden ? Number(values.hidden) : undefined,
      embedDim: values["embed-dim"] ? Number(values["embed-dim"]) : undefined,
      nClasses: values["n-classes"] ? Number(values["n-classes"]) : undefined,
      seed: values.seed ? Number(values.seed) : undefined,
    });
    console.error(`wrote checkpoint ${values.out}`);
    return;
  }

  if (command !== "export-embeddings" && command !== "export-predictions") {
    fail(`unknown command "${command ?? ""}"`);
  }
  if (!values.checkpoint || !values.store) {
    fail("--checkpoint and --store are required");
  }
  const job: BridgeJob = {
    modelTag: values.model as ModelTag,
    checkpoint: values.checkpoint,
    adaptation:
      command === "export-embeddings"
        ? { kind: "frozen" }
        : parseAdaptation(values.adaptation ?? "full_ft"),
    epochStore: values.store,
    out: values.out,
  };
  runJob(job);
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  try {
    main(process.argv.slice(2));
  } catch (err) {
    if (err instanceof BridgeError) {
      console.error(`error: ${err.message}`);
      process.exit(1);
    }
    throw err;
  }
}
