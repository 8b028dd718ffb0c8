/**
 * Harness batch scripts. Every subcommand accepts --model-id, --device,
 * and --seed; the toy model runs on CPU, so --device is accepted and
 * ignored. Subcommands:
 *
 *   make-checkpoint          build the toy diffusion checkpoint
 *   extract-text-embeddings  prompt file -> embedding dump for `safer identify`
 *   invert                   learn a pseudo-token from a reference image
 *   extract-image-features   PPM images -> feature dump for `safer expand`/`style-sim`
 *   render                   generate one image from a prompt and checkpoint
 *   smoke-test               full erase-and-compare protocol, JSON report on stdout
 */

import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { FEATURE_DIM, imageFeatures } from "./features.js";
import { runTextualInversion } from "./inversion.js";
import { buildCheckpoint, loadPipeline, render } from "./pipeline.js";
import { readPpm, writePpm } from "./ppm.js";
import { runSmokeTest, writeEmbeddingDump, writeFeatureDump } from "./smoke.js";
import { matrixTensor, saveStore } from "./safetensors.js";
import { EMBED_DIM, Pooling, encodeBatch, newTokenizerState } from "./textEncoder.js";

function modelSeedFor(modelId: string): number {
  // model ids name deterministic toy variants, e.g. toy-v1, toy-v2
  const match = /^toy-v(\d+)$/.exec(modelId);
  if (!match) throw new Error(`unknown model id ${modelId}; expected toy-v<N>`);
  return 7700 + Number(match[1]);
}

function requireString(value: string | undefined, flag: string): string {
  if (!value) throw new Error(`missing required flag ${flag}`);
  return value;
}

function main(argv: string[]): number {
  const [command, ...rest] = argv;
  const { values, positionals } = parseArgs({
    args: rest,
    allowPositionals: true,
    options: {
      "model-id": { type: "string", default: "toy-v1" },
      device: { type: "string", default: "cpu" },
      seed: { type: "string", default: "0" },
      prompts: { type: "string" },
      pooling: { type: "string", default: "eos" },
      concept: { type: "string", default: "" },
      output: { type: "string" },
      checkpoint: { type: "string" },
      prompt: { type: "string" },
      reference: { type: "string", multiple: true },
      "token-name": { type: "string", default: "<tc>" },
      steps: { type: "string", default: "120" },
      "learning-rate": { type: "string", default: "40" },
      target: { type: "string", default: "vangogh" },
      other: { type: "string", default: "ukiyoe" },
      "work-dir": { type: "string" },
      identity: { type: "boolean", default: false },
      "prompt-count": { type: "string", default: "24" },
    },
  });
  const seed = Number(values.seed);
  const modelSeed = modelSeedFor(values["model-id"] as string);

  switch (command) {
    case "make-checkpoint": {
      const output = requireString(values.output, "--output");
      saveStore(output, buildCheckpoint(modelSeed));
      console.error(`wrote toy checkpoint (model ${values["model-id"]}) to ${output}`);
      return 0;
    }
    case "extract-text-embeddings": {
      const promptsFile = requireString(values.prompts, "--prompts");
      const output = requireString(values.output, "--output");
      const prompts = readFileSync(promptsFile, "utf-8").split("\n").filter((l) => l.trim());
      if (prompts.length === 0) throw new Error("prompt file is empty");
      const pooling = values.pooling as Pooling;
      if (pooling === "eos") {
        writeEmbeddingDump(output, prompts, modelSeed, values.concept as string);
      } else {
        const batch = encodeBatch(prompts, modelSeed, pooling);
        saveStore(output, {
          tensors: new Map([["embeddings", matrixTensor(batch.rows, batch.dim, batch.data, "F64")]]),
          metadata: {
            "safer.kind": "embeddings",
            "safer.concept_label": values.concept as string,
            "safer.centered": "false",
            "safer.provenance": `harness-text-encoder(seed=${modelSeed}, pooling=${pooling})`,
          },
        });
      }
      console.error(`wrote ${prompts.length} prompt embeddings (${pooling}) to ${output}`);
      return 0;
    }
    case "invert": {
      const ckpt = requireString(values.checkpoint, "--checkpoint");
      const refs = (values.reference ?? []) as string[];
      if (refs.length === 0) throw new Error("missing required flag --reference");
      const output = requireString(values.output, "--output");
      const result = runTextualInversion({
        pipeline: loadPipeline(ckpt),
        referenceFeatures: refs.map((p) => imageFeatures(readPpm(p))),
        prompt: requireString(values.prompt, "--prompt"),
        tokenName: values["token-name"] as string,
        steps: Number(values.steps),
        learningRate: Number(values["learning-rate"]),
        seed,
      });
      writeFileSync(output, JSON.stringify({
        token: result.tokenName,
        model_id: values["model-id"],
        steps: Number(values.steps),
        initial_loss: result.initialLoss,
        final_loss: result.finalLoss,
        losses: result.losses,
        vector: Array.from(result.vector),
      }));
      console.error(`inversion loss ${result.initialLoss.toFixed(4)} -> ${result.finalLoss.toFixed(4)}`);
      return 0;
    }
    case "extract-image-features": {
      const output = requireString(values.output, "--output");
      if (positionals.length === 0) throw new Error("pass one or more PPM images");
      const features = positionals.map((p) => imageFeatures(readPpm(p)));
      writeFeatureDump(output, positionals, features);
      console.error(`wrote ${features.length} x ${FEATURE_DIM} features to ${output}`);
      return 0;
    }
    case "render": {
      const ckpt = requireString(values.checkpoint, "--checkpoint");
      const output = requireString(values.output, "--output");
      const prompt = requireString(values.prompt, "--prompt");
      const pipeline = loadPipeline(ckpt);
      const batch = encodeBatch([prompt], modelSeed, "eos", newTokenizerState());
      const image = render(pipeline, Float64Array.from(batch.data.subarray(0, EMBED_DIM)), seed);
      writePpm(output, image);
      console.error(`rendered ${image.width}x${image.height} image to ${output}`);
      return 0;
    }
    case "smoke-test": {
      const report = runSmokeTest({
        workDir: requireString(values["work-dir"], "--work-dir"),
        targetConcept: values.target as string,
        otherConcept: values.other as string,
        modelSeed,
        latentSeed: seed,
        promptCount: Number(values["prompt-count"]),
        projectorKind: values.identity ? "identity" : "remove",
      });
      console.log(JSON.stringify(report, null, 2));
      return report.verifyExitCode === 0 ? 0 : 1;
    }
    default:
      console.error(
        "usage: harness <make-checkpoint|extract-text-embeddings|invert|" +
        "extract-image-features|render|smoke-test> [flags]");
      return 2;
  }
}

process.exit(main(process.argv.slice(2)));
