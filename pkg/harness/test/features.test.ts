import { describe, expect, it } from "vitest";

import { cosine, imageFeatures } from "../src/features.js";
import { buildCheckpoint, loadPipeline, render } from "../src/pipeline.js";
import { flipHorizontal } from "../src/ppm.js";
import { encodePrompt } from "../src/textEncoder.js";
import { saveStore } from "../src/safetensors.js";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

const SEED = 7701;

function pipelineFixture() {
  const dir = mkdtempSync(join(tmpdir(), "harness-feat-"));
  const path = join(dir, "ckpt.st");
  saveStore(path, buildCheckpoint(SEED));
  return loadPipeline(path);
}

describe("image features (ViT stand-in)", () => {
  const pipe = pipelineFixture();
  const monet1 = render(pipe, encodePrompt("a house in the style of monet", SEED), 10);
  const monet2 = render(pipe, encodePrompt("a river in the style of monet", SEED), 11);
  const photo = render(pipe, encodePrompt("a photo of a concrete parking lot", SEED), 12);

  it("identical images have cosine 1", () => {
    const a = imageFeatures(monet1);
    const b = imageFeatures(render(pipe, encodePrompt("a house in the style of monet", SEED), 10));
    expect(cosine(a, b)).toBeCloseTo(1.0, 12);
  });

  it("a flip stays closer than an unrelated image", () => {
    const base = imageFeatures(monet1);
    const flipped = imageFeatures(flipHorizontal(monet1));
    const unrelated = imageFeatures(photo);
    expect(cosine(base, flipped)).toBeGreaterThan(cosine(base, unrelated));
  });

  it("same-style renders are mutually closer than style-vs-photo", () => {
    const a = imageFeatures(monet1);
    const b = imageFeatures(monet2);
    const c = imageFeatures(photo);
    expect(cosine(a, b)).toBeGreaterThan(cosine(a, c));
    expect(cosine(a, b)).toBeGreaterThan(cosine(b, c));
  });
});
