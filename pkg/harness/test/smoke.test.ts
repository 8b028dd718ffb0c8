import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { runSmokeTest } from "../src/smoke.js";

function tempDir(tag: string) {
  return mkdtempSync(join(tmpdir(), `harness-smoke-${tag}-`));
}

const BASE = {
  targetConcept: "vangogh",
  otherConcept: "ukiyoe",
  modelSeed: 7701,
  latentSeed: 42,
  promptCount: 24,
} as const;

describe("generation smoke test via the safer CLI", () => {
  it("identity-projector patch reproduces pixel-identical images", () => {
    const report = runSmokeTest({
      ...BASE,
      workDir: tempDir("identity"),
      projectorKind: "identity",
    });
    expect(report.verifyExitCode).toBe(0);
    expect(report.pixelIdentical).toBe(true);
    expect(report.targetAfter).toBeCloseTo(report.targetBefore, 12);
    expect(report.otherAfter).toBeCloseTo(report.otherBefore, 12);
  });

  it("erasure patch lowers target style similarity and spares other concepts", () => {
    const workDir = tempDir("erase");
    const report = runSmokeTest({
      ...BASE,
      workDir,
      projectorKind: "remove",
    });
    // the patched file loads in the unmodified pipeline and passes verify
    expect(report.verifyExitCode).toBe(0);
    // erasure visibly changes target generations
    expect(report.pixelIdentical).toBe(false);
    expect(report.targetAfter).toBeLessThan(report.targetBefore);
    // non-target concept similarity moves by less than 10 percent
    const drift = Math.abs(report.otherAfter - report.otherBefore) / report.otherBefore;
    expect(drift).toBeLessThan(0.10);
    // the grid image exists and is a P6 PPM with both panels
    const grid = readFileSync(join(workDir, "grid.ppm"));
    expect(grid.subarray(0, 2).toString("ascii")).toBe("P6");
    expect(grid.toString("ascii", 0, 16)).toContain("64 32");
  });
});
