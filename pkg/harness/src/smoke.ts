/**
 * End-to-end smoke test: build toy checkpoint -> dump style-prompt
 * embeddings -> identify/project/patch/verify through the `safer` CLI ->
 * generate before/after images -> compare feature-level style similarity
 * (also through the CLI). Asser-style numeric checks live in the tests;
 * this module just runs the protocol and reports.
 */

import { mkdirSync } from "node:fs";
import { join } from "node:path";

import { imageFeatures } from "./features.js";
import { Pipeline, buildCheckpoint, loadPipeline, render } from "./pipeline.js";
import { sideBySide, writePpm } from "./ppm.js";
import { stylePrompts } from "./prompts.js";
import { parseStyleSim, runSafer } from "./safer.js";
import { Store, matrixTensor, saveStore } from "./safetensors.js";
import { EMBED_DIM, encodeBatch } from "./textEncoder.js";

export interface SmokeOptions {
  workDir: string;
  targetConcept: string;
  otherConcept: string;
  modelSeed: number;
  latentSeed: number;
  promptCount: number;
  /** "remove" for erasure, "identity" for the lambda-0 no-op control */
  projectorKind: "remove" | "identity";
}

export interface SmokeReport {
  checkpointPath: string;
  patchedPath: string;
  gridPath: string;
  verifyExitCode: number;
  targetBefore: number;
  targetAfter: number;
  otherBefore: number;
  otherAfter: number;
  pixelIdentical: boolean;
}

export function writeEmbeddingDump(path: string, prompts: string[], modelSeed: number, label: string): void {
  const batch = encodeBatch(prompts, modelSeed, "eos");
  const store: Store = {
    tensors: new Map([["embeddings", matrixTensor(batch.rows, batch.dim, batch.data, "F64")]]),
    metadata: {
      "safer.kind": "embeddings",
      "safer.concept_label": label,
      "safer.centered": "false",
      "safer.provenance": `harness-text-encoder(seed=${modelSeed}, pooling=eos)`,
    },
  };
  saveStore(path, store);
}

export function writeFeatureDump(path: string, labels: string[], features: Float64Array[]): void {
  const dim = features[0].length;
  const data = new Float64Array(features.length * dim);
  features.forEach((f, i) => data.set(f, i * dim));
  const store: Store = {
    tensors: new Map([["features", matrixTensor(features.length, dim, data, "F64")]]),
    metadata: { "safer.kind": "features", "safer.labels": JSON.stringify(labels) },
  };
  saveStore(path, store);
}

function renderSetFeatures(pipe: Pipeline, prompts: string[], modelSeed: number, latentSeed: number) {
  const batch = encodeBatch(prompts, modelSeed, "eos");
  const features: Float64Array[] = [];
  for (let i = 0; i < prompts.length; i++) {
    const embedding = batch.data.subarray(i * EMBED_DIM, (i + 1) * EMBED_DIM);
    features.push(imageFeatures(render(pipe, Float64Array.from(embedding), latentSeed + i)));
  }
  return features;
}

function styleSim(workDir: string, name: string, refFeats: Float64Array[], fakeFeats: Float64Array[]): number {
  const refPath = join(workDir, `${name}.ref.st`);
  const fakePath = join(workDir, `${name}.fake.st`);
  writeFeatureDump(refPath, refFeats.map((_, i) => `ref${i}`), refFeats);
  writeFeatureDump(fakePath, fakeFeats.map((_, i) => `gen${i}`), fakeFeats);
  return parseStyleSim(runSafer(["style-sim", "--ref", refPath, "--fake", fakePath]).stdout);
}

export function runSmokeTest(opts: SmokeOptions): SmokeReport {
  mkdirSync(opts.workDir, { recursive: true });
  const ckptPath = join(opts.workDir, "checkpoint.safetensors");
  const embPath = join(opts.workDir, "style_embeddings.safetensors");
  const basisPath = join(opts.workDir, "basis.safetensors");
  const projPath = join(opts.workDir, "projector.safetensors");
  const patchedPath = join(opts.workDir, "patched.safetensors");
  const gridPath = join(opts.workDir, "grid.ppm");

  saveStore(ckptPath, buildCheckpoint(opts.modelSeed));

  // subspace identification from concept-bearing prompts, via the CLI
  const idPrompts = stylePrompts(opts.targetConcept, opts.promptCount);
  writeEmbeddingDump(embPath, idPrompts, opts.modelSeed, opts.targetConcept);
  runSafer(["identify", "--embeddings", embPath, "--rank", "1", "--output", basisPath]);
  if (opts.projectorKind === "identity") {
    runSafer(["project", "--basis", basisPath, "--mode", "amplify", "--lambda", "0",
              "--output", projPath]);
  } else {
    runSafer(["project", "--basis", basisPath, "--mode", "remove", "--output", projPath]);
  }
  runSafer(["patch", "--checkpoint", ckptPath, "--projector", projPath,
            "--output", patchedPath, "--report-file", join(opts.workDir, "patch_report.txt")]);
  const verify = runSafer(["verify", "--original", ckptPath, "--patched", patchedPath,
                           "--projector", projPath], { allowFailure: true });

  // the patched checkpoint must load in the unmodified pipeline
  const original = loadPipeline(ckptPath);
  const patched = loadPipeline(patchedPath);

  // held-out prompts (offset into the template/object grid) for evaluation
  const evalTarget = stylePrompts(opts.targetConcept, 8).slice(0, 8);
  const evalOther = stylePrompts(opts.otherConcept, 8);

  // references: original-model generations at separate latent seeds
  const refTarget = renderSetFeatures(original, evalTarget, opts.modelSeed, opts.latentSeed + 1000);
  const refOther = renderSetFeatures(original, evalOther, opts.modelSeed, opts.latentSeed + 2000);

  const beforeTarget = renderSetFeatures(original, evalTarget, opts.modelSeed, opts.latentSeed);
  const afterTarget = renderSetFeatures(patched, evalTarget, opts.modelSeed, opts.latentSeed);
  const beforeOther = renderSetFeatures(original, evalOther, opts.modelSeed, opts.latentSeed + 500);
  const afterOther = renderSetFeatures(patched, evalOther, opts.modelSeed, opts.latentSeed + 500);

  const report: SmokeReport = {
    checkpointPath: ckptPath,
    patchedPath,
    gridPath,
    verifyExitCode: verify.code,
    targetBefore: styleSim(opts.workDir, "target_before", refTarget, beforeTarget),
    targetAfter: styleSim(opts.workDir, "target_after", refTarget, afterTarget),
    otherBefore: styleSim(opts.workDir, "other_before", refOther, beforeOther),
    otherAfter: styleSim(opts.workDir, "other_after", refOther, afterOther),
    pixelIdentical: renderPair(original, patched, evalTarget[0], opts, gridPath),
  };
  return report;
}

/** Render the first prompt with both checkpoints, save the grid, report equality. */
function renderPair(
  original: Pipeline,
  patched: Pipeline,
  prompt: string,
  opts: SmokeOptions,
  gridPath: string,
): boolean {
  const batch = encodeBatch([prompt], opts.modelSeed, "eos");
  const embedding = Float64Array.from(batch.data.subarray(0, EMBED_DIM));
  const before = render(original, embedding, opts.latentSeed);
  const after = render(patched, embedding, opts.latentSeed);
  writePpm(gridPath, sideBySide([before, after]));
  for (let i = 0; i < before.pixels.length; i++) {
    if (Math.round(255 * before.pixels[i]) !== Math.round(255 * after.pixels[i])) return false;
  }
  return true;
}
