import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { cosine, imageFeatures } from "../src/features.js";
import { runTextualInversion } from "../src/inversion.js";
import { buildCheckpoint, loadPipeline, render } from "../src/pipeline.js";
import { stylePrompts } from "../src/prompts.js";
import { parseStyleSim, runSafer } from "../src/safer.js";
import { matrixTensor, saveStore } from "../src/safetensors.js";
import { writeFeatureDump } from "../src/smoke.js";
import { EMBED_DIM, encodeBatch, encodePrompt } from "../src/textEncoder.js";

const SEED = 7701;

function checkpointFixture() {
  const dir = mkdtempSync(join(tmpdir(), "harness-inv-"));
  const path = join(dir, "ckpt.st");
  saveStore(path, buildCheckpoint(SEED));
  return { dir, path, pipe: loadPipeline(path) };
}

describe("textual inversion (toy pipeline)", () => {
  const { dir, path: ckptPath, pipe } = checkpointFixture();
  // reference images produced with a concept word hidden from the learner
  const refSeeds = [1, 2];
  const hiddenEmbedding = encodePrompt("a meadow in the style of rembrandt", SEED);
  const references = refSeeds.map((s) => imageFeatures(render(pipe, hiddenEmbedding, s)));

  it("zero steps returns the initialization", () => {
    const result = runTextualInversion({
      pipeline: pipe,
      referenceFeatures: references,
      prompt: "a meadow in the style of <tc>",
      tokenName: "<tc>",
      steps: 0,
      seed: 3,
    });
    expect(result.vector.length).toBe(EMBED_DIM);
    expect(result.losses).toHaveLength(1);
    expect(result.finalLoss).toBe(result.initialLoss);
  });

  it("rejects a prompt without the token", () => {
    expect(() => runTextualInversion({
      pipeline: pipe,
      referenceFeatures: references,
      prompt: "a meadow",
      tokenName: "<tc>",
      steps: 1,
    })).toThrow(/must contain/);
  });

  it("optimization reconstructs the reference and the token erases end to end", () => {
    const result = runTextualInversion({
      pipeline: pipe,
      referenceFeatures: references,
      prompt: "a meadow in the style of <tc>",
      tokenName: "<tc>",
      steps: 200,
      seed: 3,
      renderSeeds: refSeeds,
    });
    // training reduced the reconstruction loss, sharply
    expect(result.finalLoss).toBeLessThan(result.initialLoss * 0.3);
    // the learned token reproduces the reference look far better than the bare prompt
    const learned = encodePrompt("a meadow in the style of <tc>", SEED, "eos", result.tokenizer);
    const learnedCos = cosine(imageFeatures(render(pipe, learned, refSeeds[0])), references[0]);
    expect(learnedCos).toBeGreaterThan(1 - result.initialLoss + 0.2);

    // full circle: identify the token's subspace from diverse token prompts
    // (through the primary CLI), merge the removal projector into the
    // checkpoint, and the reference look disappears from token-prompted
    // generations while an unrelated concept is untouched
    const tiPrompts = stylePrompts("<tc>", 24);
    const batch = encodeBatch(tiPrompts, SEED, "eos", result.tokenizer);
    const embPath = join(dir, "ti_emb.st");
    saveStore(embPath, {
      tensors: new Map([["embeddings", matrixTensor(batch.rows, batch.dim, batch.data, "F64")]]),
      metadata: {
        "safer.kind": "embeddings",
        "safer.concept_label": "learned-token",
        "safer.centered": "false",
      },
    });
    const basisPath = join(dir, "basis.st");
    const projPath = join(dir, "proj.st");
    const patchedPath = join(dir, "patched.st");
    runSafer(["identify", "--embeddings", embPath, "--rank", "1", "--output", basisPath]);
    runSafer(["project", "--basis", basisPath, "--output", projPath]);
    runSafer(["patch", "--checkpoint", ckptPath, "--projector", projPath, "--output", patchedPath]);
    runSafer(["verify", "--original", ckptPath, "--patched", patchedPath, "--projector", projPath]);
    const patched = loadPipeline(patchedPath);

    const evalPrompts = stylePrompts("<tc>", 8);
    const feats = (pipeline: typeof pipe, base: number) => {
      const b = encodeBatch(evalPrompts, SEED, "eos", result.tokenizer);
      return evalPrompts.map((_, i) =>
        imageFeatures(render(pipeline, Float64Array.from(
          b.data.subarray(i * EMBED_DIM, (i + 1) * EMBED_DIM)), base + i)));
    };
    const sim = (tag: string, ref: Float64Array[], fake: Float64Array[]) => {
      const refPath = join(dir, `${tag}.ref.st`);
      const fakePath = join(dir, `${tag}.fake.st`);
      writeFeatureDump(refPath, ref.map((_, i) => `r${i}`), ref);
      writeFeatureDump(fakePath, fake.map((_, i) => `f${i}`), fake);
      return parseStyleSim(runSafer(["style-sim", "--ref", refPath, "--fake", fakePath]).stdout);
    };
    const before = sim("before", references, feats(pipe, 100));
    const after = sim("after", references, feats(patched, 100));
    expect(after).toBeLessThan(before);

    // unrelated concept: generations stay close to their own references
    const otherPrompts = stylePrompts("ukiyoe", 8);
    const otherFeats = (pipeline: typeof pipe, base: number) => {
      const b = encodeBatch(otherPrompts, SEED, "eos");
      return otherPrompts.map((_, i) =>
        imageFeatures(render(pipeline, Float64Array.from(
          b.data.subarray(i * EMBED_DIM, (i + 1) * EMBED_DIM)), base + i)));
    };
    const otherRef = otherFeats(pipe, 2000);
    const otherBefore = sim("otherBefore", otherRef, otherFeats(pipe, 600));
    const otherAfter = sim("otherAfter", otherRef, otherFeats(patched, 600));
    expect(Math.abs(otherAfter - otherBefore) / otherBefore).toBeLessThan(0.10);
  });
});
