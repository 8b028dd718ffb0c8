/**
 * Deterministic additive text encoder, the harness's stand-in for a CLIP
 * text tower (no pretrained weights are available in this environment).
 *
 * Each vocabulary word maps to a fixed seeded Gaussian vector; function
 * words carry a small norm, content words a unit norm. A prompt embedding
 * is the sum of its token vectors (`eos` pooling: the sequence summary),
 * their mean, or the full token stack. Prompts sharing a concept word
 * therefore share a common embedding component, which is exactly the
 * structure the subspace-identification CLI estimates.
 */

import { fnv1a, gaussianVector } from "./rng.js";

export const EMBED_DIM = 256;

const FUNCTION_WORDS = new Set([
  "a", "an", "the", "in", "of", "by", "on", "at", "with", "and",
  "style", "inspired", "painting", "photo", "picture",
]);

const FUNCTION_NORM = 0.1;
const CONTENT_NORM = 1.0;

export type Pooling = "eos" | "mean" | "all-tokens";

export interface TokenizerState {
  /** learned pseudo-tokens (textual inversion output) */
  extraTokens: Map<string, Float64Array>;
}

export function newTokenizerState(): TokenizerState {
  return { extraTokens: new Map() };
}

export function tokenize(prompt: string): string[] {
  return prompt
    .toLowerCase()
    .replace(/[^a-z0-9<>\s-]/g, " ")
    .split(/\s+/)
    .filter((t) => t.length > 0);
}

function scaleTo(vector: Float64Array, norm: number): Float64Array {
  let sum = 0;
  for (const x of vector) sum += x * x;
  const factor = norm / Math.sqrt(sum);
  return vector.map((x) => x * factor);
}

/** Fixed per-word vector; `modelSeed` selects the model variant. */
export function tokenVector(word: string, modelSeed: number, state?: TokenizerState): Float64Array {
  const learned = state?.extraTokens.get(word);
  if (learned) return learned;
  const raw = gaussianVector((fnv1a(word) ^ modelSeed) >>> 0, EMBED_DIM);
  const norm = FUNCTION_WORDS.has(word) ? FUNCTION_NORM : CONTENT_NORM;
  return scaleTo(raw, norm);
}

export function encodePrompt(
  prompt: string,
  modelSeed: number,
  pooling: Exclude<Pooling, "all-tokens"> = "eos",
  state?: TokenizerState,
): Float64Array {
  const tokens = tokenize(prompt);
  if (tokens.length === 0) throw new Error(`prompt has no tokens: ${JSON.stringify(prompt)}`);
  const acc = new Float64Array(EMBED_DIM);
  for (const token of tokens) {
    const vec = tokenVector(token, modelSeed, state);
    for (let i = 0; i < EMBED_DIM; i++) acc[i] += vec[i];
  }
  if (pooling === "mean") {
    for (let i = 0; i < EMBED_DIM; i++) acc[i] /= tokens.length;
  }
  return acc;
}

export function encodeTokens(prompt: string, modelSeed: number, state?: TokenizerState): Float64Array[] {
  return tokenize(prompt).map((t) => tokenVector(t, modelSeed, state));
}

/** [N, d] row-major matrix of prompt embeddings. */
export function encodeBatch(
  prompts: string[],
  modelSeed: number,
  pooling: Pooling = "eos",
  state?: TokenizerState,
): { rows: number; dim: number; data: Float64Array } {
  if (pooling === "all-tokens") {
    const stacked: Float64Array[] = [];
    for (const prompt of prompts) stacked.push(...encodeTokens(prompt, modelSeed, state));
    const data = new Float64Array(stacked.length * EMBED_DIM);
    stacked.forEach((vec, r) => data.set(vec, r * EMBED_DIM));
    return { rows: stacked.length, dim: EMBED_DIM, data };
  }
  const data = new Float64Array(prompts.length * EMBED_DIM);
  prompts.forEach((prompt, r) => data.set(encodePrompt(prompt, modelSeed, pooling, state), r * EMBED_DIM));
  return { rows: prompts.length, dim: EMBED_DIM, data };
}
