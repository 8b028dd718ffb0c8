/**
 * Toy text-to-image pipeline whose conditioning path mirrors the real
 * thing: cross-attention K/V weights (named `...attn2.to_k/to_v.weight`,
 * stored in the shared container format) linearly consume the prompt
 * embedding, and everything downstream depends on the embedding only
 * through those products. Patching the checkpoint with a projector is
 * therefore behaviorally identical to projecting the embedding, which is
 * the property the smoke tests probe.
 */

import { EMBED_DIM } from "./textEncoder.js";
import { gaussianVector, mulberry32 } from "./rng.js";
import { Store, Tensor, loadStore } from "./safetensors.js";

export const ATTN_DIM = 24;
export const IMAGE_SIZE = 32;
export const ATTN_BLOCKS = 2;

export interface Pipeline {
  /** per block: [ATTN_DIM, EMBED_DIM] row-major */
  toK: Float64Array[];
  toV: Float64Array[];
  /** [3, ATTN_DIM] colorizer */
  toRgb: Float64Array;
  modelSeed: number;
}

function matmulVec(mat: Float64Array, rows: number, cols: number, vec: Float64Array): Float64Array {
  const out = new Float64Array(rows);
  for (let r = 0; r < rows; r++) {
    let acc = 0;
    const base = r * cols;
    for (let c = 0; c < cols; c++) acc += mat[base + c] * vec[c];
    out[r] = acc;
  }
  return out;
}

export function buildCheckpoint(modelSeed: number): Store {
  const tensors = new Map<string, Tensor>();
  const scale = 1.0 / Math.sqrt(EMBED_DIM);
  for (let b = 0; b < ATTN_BLOCKS; b++) {
    const k = gaussianVector(modelSeed + 101 + b, ATTN_DIM * EMBED_DIM).map((x) => x * scale);
    const v = gaussianVector(modelSeed + 201 + b, ATTN_DIM * EMBED_DIM).map((x) => x * scale);
    tensors.set(`unet.blocks.${b}.attn2.to_k.weight`, { dtype: "F32", shape: [ATTN_DIM, EMBED_DIM], data: k });
    tensors.set(`unet.blocks.${b}.attn2.to_v.weight`, { dtype: "F32", shape: [ATTN_DIM, EMBED_DIM], data: v });
    // self-attention decoys: must never be touched by the default selector
    const selfAttn = gaussianVector(modelSeed + 301 + b, ATTN_DIM * ATTN_DIM).map((x) => x * 0.1);
    tensors.set(`unet.blocks.${b}.attn1.to_k.weight`, { dtype: "F32", shape: [ATTN_DIM, ATTN_DIM], data: selfAttn });
    tensors.set(`unet.blocks.${b}.norm.weight`, { dtype: "F32", shape: [ATTN_DIM], data: new Float64Array(ATTN_DIM).fill(1) });
  }
  const toRgb = gaussianVector(modelSeed + 401, 3 * ATTN_DIM).map((x) => x / Math.sqrt(ATTN_DIM));
  tensors.set("decoder.to_rgb.weight", { dtype: "F32", shape: [3, ATTN_DIM], data: toRgb });
  return {
    tensors,
    metadata: {
      "harness.kind": "toy-diffusion-checkpoint",
      "harness.model_seed": String(modelSeed),
      "harness.embed_dim": String(EMBED_DIM),
    },
  };
}

/** Load a checkpoint file into the generation pipeline, validating layout. */
export function loadPipeline(path: string): Pipeline {
  const store = loadStore(path);
  const toK: Float64Array[] = [];
  const toV: Float64Array[] = [];
  for (let b = 0; b < ATTN_BLOCKS; b++) {
    for (const [kind, into] of [["to_k", toK], ["to_v", toV]] as const) {
      const name = `unet.blocks.${b}.attn2.${kind}.weight`;
      const tensor = store.tensors.get(name);
      if (!tensor) throw new Error(`checkpoint is missing ${name}`);
      if (tensor.shape[0] !== ATTN_DIM || tensor.shape[1] !== EMBED_DIM) {
        throw new Error(`checkpoint tensor ${name} has shape [${tensor.shape}]`);
      }
      into.push(tensor.data);
    }
  }
  const rgb = store.tensors.get("decoder.to_rgb.weight");
  if (!rgb) throw new Error("checkpoint is missing decoder.to_rgb.weight");
  const modelSeed = Number(store.metadata["harness.model_seed"] ?? "0");
  return { toK, toV, toRgb: rgb.data, modelSeed };
}

export interface RenderedImage {
  width: number;
  height: number;
  /** RGB floats in [0, 1], length width*height*3 */
  pixels: Float64Array;
}

/**
 * Deterministic generation: seeded latent noise gated by the text-derived
 * attention keys, colored by the text-derived values. The DC term keeps a
 * latent-independent color signature so concept content survives across
 * seeds, and the gated term modulates texture.
 */
export function render(pipe: Pipeline, embedding: Float64Array, seed: number): RenderedImage {
  if (embedding.length !== EMBED_DIM) {
    throw new Error(`embedding length ${embedding.length} != ${EMBED_DIM}`);
  }
  const n = IMAGE_SIZE * IMAGE_SIZE;
  const pixels = new Float64Array(n * 3);
  const keys = pipe.toK.map((m) => matmulVec(m, ATTN_DIM, EMBED_DIM, embedding));
  const values = pipe.toV.map((m) => matmulVec(m, ATTN_DIM, EMBED_DIM, embedding));

  const latent = gaussianVector((seed * 2654435761) >>> 0, n * ATTN_DIM);
  const acc = new Float64Array(ATTN_DIM);
  for (let p = 0; p < n; p++) {
    acc.fill(0);
    for (let b = 0; b < ATTN_BLOCKS; b++) {
      let response = 0;
      const base = p * ATTN_DIM;
      for (let c = 0; c < ATTN_DIM; c++) response += latent[base + c] * keys[b][c];
      const gate = Math.tanh(2.0 * response);
      for (let c = 0; c < ATTN_DIM; c++) acc[c] += gate * values[b][c] + 0.5 * values[b][c];
    }
    for (let ch = 0; ch < 3; ch++) {
      let shade = 0;
      const base = ch * ATTN_DIM;
      for (let c = 0; c < ATTN_DIM; c++) shade += pipe.toRgb[base + c] * acc[c];
      pixels[p * 3 + ch] = Math.min(1, Math.max(0, 0.5 + 1.5 * shade));
    }
  }
  return { width: IMAGE_SIZE, height: IMAGE_SIZE, pixels };
}
