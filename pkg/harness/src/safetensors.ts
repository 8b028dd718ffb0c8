/**
 * Minimal safetensors container I/O (float32/float64), the file format
 * shared with the `safer` CLI: 8-byte little-endian header length, JSON
 * header with optional __metadata__, then raw row-major payloads.
 */

import { readFileSync, writeFileSync } from "node:fs";

export type Dtype = "F32" | "F64";

export interface Tensor {
  dtype: Dtype;
  shape: number[];
  /** row-major values, length = product(shape) */
  data: Float64Array;
}

export interface Store {
  tensors: Map<string, Tensor>;
  metadata: Record<string, string>;
}

const BYTES: Record<Dtype, number> = { F32: 4, F64: 8 };

function elementCount(shape: number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export function saveStore(path: string, store: Store): void {
  interface Entry {
    dtype: Dtype;
    shape: number[];
    data_offsets: [number, number];
  }
  const header: Record<string, Entry | Record<string, string>> = {};
  if (Object.keys(store.metadata).length > 0) {
    const sorted: Record<string, string> = {};
    for (const key of Object.keys(store.metadata).sort()) sorted[key] = store.metadata[key];
    header["__metadata__"] = sorted;
  }
  const payloads: Buffer[] = [];
  let offset = 0;
  for (const [name, tensor] of store.tensors) {
    const count = elementCount(tensor.shape);
    if (count !== tensor.data.length) {
      throw new Error(`tensor ${name}: shape ${tensor.shape} does not match data length ${tensor.data.length}`);
    }
    const bytes = count * BYTES[tensor.dtype];
    let buf: Buffer;
    if (tensor.dtype === "F64") {
      buf = Buffer.from(new Float64Array(tensor.data).buffer);
    } else {
      buf = Buffer.from(Float32Array.from(tensor.data).buffer);
    }
    payloads.push(buf);
    header[name] = { dtype: tensor.dtype, shape: tensor.shape, data_offsets: [offset, offset + bytes] };
    offset += bytes;
  }
  let headerJson = Buffer.from(JSON.stringify(header), "utf-8");
  const pad = (8 - ((8 + headerJson.length) % 8)) % 8;
  if (pad > 0) headerJson = Buffer.concat([headerJson, Buffer.alloc(pad, 0x20)]);
  const lenBuf = Buffer.alloc(8);
  lenBuf.writeBigUInt64LE(BigInt(headerJson.length));
  writeFileSync(path, Buffer.concat([lenBuf, headerJson, ...payloads]));
}

export function loadStore(path: string): Store {
  const blob = readFileSync(path);
  if (blob.length < 8) throw new Error(`${path}: too short for a header`);
  const headerLen = Number(blob.readBigUInt64LE(0));
  if (8 + headerLen > blob.length) throw new Error(`${path}: header length exceeds file size`);
  const header = JSON.parse(blob.subarray(8, 8 + headerLen).toString("utf-8"));
  const buffer = blob.subarray(8 + headerLen);

  const store: Store = { tensors: new Map(), metadata: {} };
  for (const [name, entry] of Object.entries(header) as [string, any][]) {
    if (name === "__metadata__") {
      store.metadata = entry as Record<string, string>;
      continue;
    }
    const { dtype, shape, data_offsets: [begin, end] } = entry;
    if (end > buffer.length) throw new Error(`${path}: payload for ${name} is truncated`);
    const slice = buffer.subarray(begin, end);
    let data: Float64Array;
    if (dtype === "F64") {
      data = new Float64Array(slice.buffer.slice(slice.byteOffset, slice.byteOffset + slice.length));
    } else if (dtype === "F32") {
      data = Float64Array.from(
        new Float32Array(slice.buffer.slice(slice.byteOffset, slice.byteOffset + slice.length)),
      );
    } else {
      throw new Error(`${path}: unsupported dtype ${dtype} for ${name}`);
    }
    if (data.length !== elementCount(shape)) {
      throw new Error(`${path}: ${name} payload does not match shape ${shape}`);
    }
    store.tensors.set(name, { dtype, shape, data });
  }
  return store;
}

export function matrixTensor(rows: number, cols: number, data: Float64Array, dtype: Dtype = "F32"): Tensor {
  return { dtype, shape: [rows, cols], data };
}
