/** Binary PPM (P6) image encoding plus a side-by-side grid helper. */

import { readFileSync, writeFileSync } from "node:fs";

import { RenderedImage } from "./pipeline.js";

export function toPpm(image: RenderedImage): Buffer {
  const header = Buffer.from(`P6\n${image.width} ${image.height}\n255\n`, "ascii");
  const body = Buffer.alloc(image.width * image.height * 3);
  for (let i = 0; i < body.length; i++) {
    body[i] = Math.round(255 * Math.min(1, Math.max(0, image.pixels[i])));
  }
  return Buffer.concat([header, body]);
}

export function writePpm(path: string, image: RenderedImage): void {
  writeFileSync(path, toPpm(image));
}

export function readPpm(path: string): RenderedImage {
  const blob = readFileSync(path);
  const text = blob.subarray(0, 64).toString("ascii");
  const match = /^P6\s+(\d+)\s+(\d+)\s+255\s/.exec(text);
  if (!match) throw new Error(`${path}: not a binary P6 PPM`);
  const width = Number(match[1]);
  const height = Number(match[2]);
  const body = blob.subarray(match[0].length);
  const pixels = new Float64Array(width * height * 3);
  for (let i = 0; i < pixels.length; i++) pixels[i] = body[i] / 255;
  return { width, height, pixels };
}

/** Concatenate equally sized images left to right (original vs patched). */
export function sideBySide(images: RenderedImage[]): RenderedImage {
  const { width, height } = images[0];
  for (const image of images) {
    if (image.width !== width || image.height !== height) {
      throw new Error("grid images must share dimensions");
    }
  }
  const pixels = new Float64Array(width * images.length * height * 3);
  const rowSpan = width * images.length * 3;
  images.forEach((image, idx) => {
    for (let y = 0; y < height; y++) {
      const src = image.pixels.subarray(y * width * 3, (y + 1) * width * 3);
      pixels.set(src, y * rowSpan + idx * width * 3);
    }
  });
  return { width: width * images.length, height, pixels };
}

export function flipHorizontal(image: RenderedImage): RenderedImage {
  const { width, height } = image;
  const pixels = new Float64Array(image.pixels.length);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const src = (y * width + x) * 3;
      const dst = (y * width + (width - 1 - x)) * 3;
      pixels[dst] = image.pixels[src];
      pixels[dst + 1] = image.pixels[src + 1];
      pixels[dst + 2] = image.pixels[src + 2];
    }
  }
  return { width, height, pixels };
}
