/**
 * Textual inversion against the toy pipeline: learn an embedding for a new
 * pseudo-token so that prompts containing it reproduce a reference image.
 *
 * The pipeline consumes an embedding only through the cross-attention K/V
 * products, so the token is parameterized in the span of those weight rows
 * (directions outside it provably cannot change the render) and optimized
 * with SPSA, averaging the loss over several latent seeds so the token
 * matches the reference's look across noise draws instead of overfitting
 * one texture. Loss is one minus the feature cosine to the reference(s);
 * the best iterate is kept.
 */

import { cosine, imageFeatures } from "./features.js";
import { ATTN_DIM, Pipeline, render } from "./pipeline.js";
import { mulberry32 } from "./rng.js";
import { EMBED_DIM, TokenizerState, encodePrompt, newTokenizerState } from "./textEncoder.js";

export interface InversionConfig {
  pipeline: Pipeline;
  /** features of the reference image(s) containing the concept */
  referenceFeatures: Float64Array[];
  /** template mentioning the new token, e.g. "a painting of flowers in <tc> style" */
  prompt: string;
  tokenName: string;
  steps: number;
  learningRate?: number;
  seed?: number;
  /** latent seeds averaged in the loss */
  renderSeeds?: number[];
}

export interface InversionResult {
  tokenName: string;
  vector: Float64Array;
  losses: number[];
  initialLoss: number;
  finalLoss: number;
  tokenizer: TokenizerState;
}

/** Orthonormal basis of the span of all to_k/to_v rows. */
export function effectiveSpan(pipe: Pipeline): Float64Array[] {
  const basis: Float64Array[] = [];
  for (const matrix of [...pipe.toK, ...pipe.toV]) {
    for (let r = 0; r < ATTN_DIM; r++) {
      const v = Float64Array.from(matrix.subarray(r * EMBED_DIM, (r + 1) * EMBED_DIM));
      for (const b of basis) {
        let dot = 0;
        for (let i = 0; i < EMBED_DIM; i++) dot += v[i] * b[i];
        for (let i = 0; i < EMBED_DIM; i++) v[i] -= dot * b[i];
      }
      let norm = 0;
      for (const x of v) norm += x * x;
      norm = Math.sqrt(norm);
      if (norm > 1e-10) {
        for (let i = 0; i < EMBED_DIM; i++) v[i] /= norm;
        basis.push(v);
      }
    }
  }
  return basis;
}

export function runTextualInversion(cfg: InversionConfig): InversionResult {
  if (cfg.referenceFeatures.length < 1) throw new Error("need at least one reference image");
  if (!cfg.prompt.includes(cfg.tokenName)) {
    throw new Error(`prompt must contain the token ${cfg.tokenName}`);
  }
  const lr = cfg.learningRate ?? 0.5;
  const seed = cfg.seed ?? 0;
  const renderSeeds = cfg.renderSeeds ?? [1, 2];
  const uniform = mulberry32((seed ^ 0x5f3759df) >>> 0);
  const stability = Math.max(10, Math.floor(cfg.steps / 10));
  const clip = 0.02;

  const span = effectiveSpan(cfg.pipeline);
  const dim = span.length;
  const toEmbedding = (w: Float64Array): Float64Array => {
    const u = new Float64Array(EMBED_DIM);
    for (let j = 0; j < dim; j++) {
      const b = span[j];
      for (let i = 0; i < EMBED_DIM; i++) u[i] += w[j] * b[i];
    }
    return u;
  };

  const loss = (w: Float64Array): number => {
    const state = newTokenizerState();
    state.extraTokens.set(cfg.tokenName, toEmbedding(w));
    const embedding = encodePrompt(cfg.prompt, cfg.pipeline.modelSeed, "eos", state);
    let total = 0;
    for (const renderSeed of renderSeeds) {
      const feats = imageFeatures(render(cfg.pipeline, embedding, renderSeed));
      // reconstruct the closest reference view at this latent
      let closest = Infinity;
      for (const ref of cfg.referenceFeatures) closest = Math.min(closest, 1 - cosine(feats, ref));
      total += closest;
    }
    return total / renderSeeds.length;
  };

  let current = new Float64Array(dim); // zero token: the prompt alone
  const initialLoss = loss(current);
  let best = current.slice();
  let bestLoss = initialLoss;
  const losses: number[] = [initialLoss];

  const grad = new Float64Array(dim);
  const probe = new Float64Array(dim);
  const delta = new Float64Array(dim);
  const gradProbes = 2;
  for (let t = 0; t < cfg.steps; t++) {
    const a = lr / Math.pow(stability + t + 1, 0.602);
    const c = 0.02 / Math.pow(t + 1, 0.101);
    grad.fill(0);
    for (let rep = 0; rep < gradProbes; rep++) {
      for (let i = 0; i < dim; i++) delta[i] = uniform() < 0.5 ? -1 : 1;
      for (let i = 0; i < dim; i++) probe[i] = current[i] + c * delta[i];
      const plus = loss(probe);
      for (let i = 0; i < dim; i++) probe[i] = current[i] - c * delta[i];
      const minus = loss(probe);
      const slope = (plus - minus) / (2 * c * gradProbes);
      for (let i = 0; i < dim; i++) grad[i] += slope * delta[i];
    }
    for (let i = 0; i < dim; i++) {
      current[i] -= Math.max(-clip, Math.min(clip, a * grad[i]));
    }
    const now = loss(current);
    if (!Number.isFinite(now)) throw new Error(`inversion diverged at step ${t}`);
    losses.push(now);
    if (now < bestLoss) {
      bestLoss = now;
      best = current.slice();
    }
  }

  const tokenizer = newTokenizerState();
  const vector = toEmbedding(best);
  tokenizer.extraTokens.set(cfg.tokenName, vector);
  return {
    tokenName: cfg.tokenName,
    vector,
    losses,
    initialLoss,
    finalLoss: bestLoss,
    tokenizer,
  };
}
