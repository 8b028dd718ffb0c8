import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { stylePrompts } from "../src/prompts.js";
import { runSafer } from "../src/safer.js";
import { writeEmbeddingDump } from "../src/smoke.js";

const SEED = 7701;

function spectrumRatios(stdout: string): number[] {
  const ratios: number[] = [];
  for (const line of stdout.split("\n")) {
    const match = /^(\d+): (\d+\.\d+)$/.exec(line.trim());
    if (match) ratios[Number(match[1])] = Number(match[2]);
  }
  return ratios;
}

describe("real-embedding spectrum through the primary CLI", () => {
  it("30 style prompts give a dominant first component (ratio > 2)", () => {
    const dir = mkdtempSync(join(tmpdir(), "harness-spec-"));
    const embPath = join(dir, "emb.st");
    writeEmbeddingDump(embPath, stylePrompts("vangogh", 30), SEED, "vangogh");

    const inspect = runSafer(["inspect", embPath]);
    const ratios = spectrumRatios(inspect.stdout);
    expect(ratios[0]).toBeGreaterThan(0);
    expect(ratios[1]).toBeGreaterThan(0);
    // model-version dependent; the toy encoder shares one concept vector
    // across prompts, so the margin is wide
    expect(ratios[0] / ratios[1]).toBeGreaterThan(2.0);

    // identify must agree and emit a valid basis file
    const basisPath = join(dir, "basis.st");
    runSafer(["identify", "--embeddings", embPath, "--rank", "1", "--output", basisPath]);
    const basisInspect = runSafer(["inspect", basisPath]);
    expect(basisInspect.stdout).toContain("basis: dim 256 rank 1");
  });
});
