/**
 * Deterministic image featurizer standing in for a ViT backbone. All
 * statistics are contrast-coded (deviations from the neutral mid-gray
 * baseline and from the image's own global stats) so the cosine between
 * two feature vectors measures how the images differ in content, not the
 * shared DC everything has. Global components are flip-invariant and
 * survive latent reseeds; patch components carry spatial texture.
 */

import { RenderedImage } from "./pipeline.js";

const GRID = 4;
const HIST_BINS = 8;
const GLOBAL_WEIGHT = 3.0;

export const FEATURE_DIM = 3 + 1 + HIST_BINS + GRID * GRID * 4;

function luminance(r: number, g: number, b: number): number {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

export function imageFeatures(image: RenderedImage): Float64Array {
  const { width, height, pixels } = image;
  const n = width * height;
  const out = new Float64Array(FEATURE_DIM);

  let sumR = 0;
  let sumG = 0;
  let sumB = 0;
  let sumL = 0;
  let sumL2 = 0;
  const hist = new Float64Array(HIST_BINS);
  for (let p = 0; p < n; p++) {
    const r = pixels[p * 3];
    const g = pixels[p * 3 + 1];
    const b = pixels[p * 3 + 2];
    const lum = luminance(r, g, b);
    sumR += r;
    sumG += g;
    sumB += b;
    sumL += lum;
    sumL2 += lum * lum;
    hist[Math.min(HIST_BINS - 1, Math.floor(lum * HIST_BINS))] += 1;
  }
  const meanR = sumR / n;
  const meanG = sumG / n;
  const meanB = sumB / n;
  const lumSd = Math.sqrt(Math.max(0, sumL2 / n - (sumL / n) ** 2));
  // deviations from mid-gray / a flat histogram, not raw levels
  out[0] = GLOBAL_WEIGHT * (meanR - 0.5);
  out[1] = GLOBAL_WEIGHT * (meanG - 0.5);
  out[2] = GLOBAL_WEIGHT * (meanB - 0.5);
  out[3] = GLOBAL_WEIGHT * lumSd;
  for (let bin = 0; bin < HIST_BINS; bin++) {
    out[4 + bin] = GLOBAL_WEIGHT * (hist[bin] / n - 1 / HIST_BINS);
  }

  // per-patch contrast against the image's own global statistics
  const patchW = Math.floor(width / GRID);
  const patchH = Math.floor(height / GRID);
  let cursor = 4 + HIST_BINS;
  for (let gy = 0; gy < GRID; gy++) {
    for (let gx = 0; gx < GRID; gx++) {
      let pr = 0;
      let pg = 0;
      let pb = 0;
      let pl = 0;
      let pl2 = 0;
      const count = patchW * patchH;
      for (let y = gy * patchH; y < (gy + 1) * patchH; y++) {
        for (let x = gx * patchW; x < (gx + 1) * patchW; x++) {
          const p = (y * width + x) * 3;
          const r = pixels[p];
          const g = pixels[p + 1];
          const b = pixels[p + 2];
          const lum = luminance(r, g, b);
          pr += r;
          pg += g;
          pb += b;
          pl += lum;
          pl2 += lum * lum;
        }
      }
      const patchLumSd = Math.sqrt(Math.max(0, pl2 / count - (pl / count) ** 2));
      out[cursor++] = pr / count - meanR;
      out[cursor++] = pg / count - meanG;
      out[cursor++] = pb / count - meanB;
      out[cursor++] = patchLumSd - lumSd;
    }
  }
  return out;
}

export function cosine(a: Float64Array, b: Float64Array): number {
  if (a.length !== b.length) throw new Error(`feature length mismatch: ${a.length} vs ${b.length}`);
  let dot = 0;
  let na = 0;
  let nb = 0;
  for (let i = 0; i < a.length; i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na === 0 || nb === 0) throw new Error("zero feature vector");
  return dot / Math.sqrt(na * nb);
}
