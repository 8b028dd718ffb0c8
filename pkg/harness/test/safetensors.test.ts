import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { loadStore, matrixTensor, saveStore, Store } from "../src/safetensors.js";
import { runSafer } from "../src/safer.js";

function tempDir() {
  return mkdtempSync(join(tmpdir(), "harness-st-"));
}

describe("safetensors container", () => {
  it("round-trips f32 and f64 tensors with metadata", () => {
    const dir = tempDir();
    const path = join(dir, "roundtrip.st");
    const store: Store = {
      tensors: new Map([
        ["a", matrixTensor(2, 3, Float64Array.from([1, 2, 3, 4, 5, 6]), "F64")],
        ["b", matrixTensor(1, 4, Float64Array.from([0.5, -0.5, 1.25, 8]), "F32")],
      ]),
      metadata: { "harness.note": "x" },
    };
    saveStore(path, store);
    const back = loadStore(path);
    expect([...back.tensors.keys()]).toEqual(["a", "b"]);
    expect(Array.from(back.tensors.get("a")!.data)).toEqual([1, 2, 3, 4, 5, 6]);
    expect(Array.from(back.tensors.get("b")!.data)).toEqual([0.5, -0.5, 1.25, 8]);
    expect(back.metadata["harness.note"]).toBe("x");
  });

  it("reads files written by the primary CLI and vice versa", () => {
    const dir = tempDir();
    const embPath = join(dir, "emb.st");
    runSafer(["--seed", "3", "synth", "--d", "16", "--N", "8", "--output", embPath]);
    const store = loadStore(embPath);
    const emb = store.tensors.get("embeddings")!;
    expect(emb.shape).toEqual([8, 16]);
    expect(store.metadata["safer.synth.rng"]).toBe("numpy-pcg64");
    for (const value of emb.data) expect(Number.isFinite(value)).toBe(true);

    // a store written here must be a valid `safer inspect` target
    const ours = join(dir, "ours.st");
    saveStore(ours, {
      tensors: new Map([["w", matrixTensor(2, 2, Float64Array.from([1, 0, 0, 1]), "F32")]]),
      metadata: {},
    });
    const inspect = runSafer(["inspect", ours]);
    expect(inspect.stdout).toContain("w [2, 2] float32");
  });

  it("rejects truncated files", () => {
    const dir = tempDir();
    const path = join(dir, "bad.st");
    saveStore(path, {
      tensors: new Map([["w", matrixTensor(4, 4, new Float64Array(16), "F64")]]),
      metadata: {},
    });
    const blob = readFileSync(path);
    writeFileSync(path, blob.subarray(0, blob.length - 16));
    expect(() => loadStore(path)).toThrow(/truncated/);
  });
});
