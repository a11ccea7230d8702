/**
 * Reader/writer for the binary tensor interchange files the geometry engine
 * produces: 64-byte header (magic "GITF", u32 version = 1, u32 dtype = 1 for
 * float32, u32 rank, 48 reserved zero bytes), rank little-endian u64 dims,
 * then the row-major little-endian float32 payload. Optional metadata lives
 * in a JSON sidecar at `<path>.json`.
 */

import * as fs from "node:fs";

const MAGIC = "GITF";
const VERSION = 1;
const DTYPE_FLOAT32 = 1;
const HEADER_SIZE = 64;

export interface GtfTensor {
  dims: number[];
  data: Float32Array;
  metadata: Record<string, unknown> | null;
}

export function readGtf(path: string): GtfTensor {
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_SIZE) {
    throw new Error(`${path}: shorter than the 64-byte header`);
  }
  if (raw.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  const version = view.getUint32(4, true);
  const dtype = view.getUint32(8, true);
  const rank = view.getUint32(12, true);
  if (version !== VERSION) throw new Error(`${path}: unsupported version ${version}`);
  if (dtype !== DTYPE_FLOAT32) throw new Error(`${path}: unsupported dtype ${dtype}`);
  if (rank < 2 || rank > 4) throw new Error(`${path}: unsupported rank ${rank}`);
  const dims: number[] = [];
  let n = 1;
  for (let i = 0; i < rank; i++) {
    const d = view.getBigUint64(HEADER_SIZE + 8 * i, true);
    dims.push(Number(d));
    n *= Number(d);
  }
  const offset = HEADER_SIZE + 8 * rank;
  if (raw.length !== offset + 4 * n) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const data = new Float32Array(n);
  for (let i = 0; i < n; i++) data[i] = view.getFloat32(offset + 4 * i, true);

  let metadata: Record<string, unknown> | null = null;
  const sidecar = path + ".json";
  if (fs.existsSync(sidecar)) {
    metadata = JSON.parse(fs.readFileSync(sidecar, "utf8"));
  }
  return { dims, data, metadata };
}

export function writeGtf(
  path: string,
  dims: number[],
  data: Float32Array,
  metadata?: Record<string, unknown>,
): void {
  const rank = dims.length;
  if (rank < 2 || rank > 4) throw new Error(`GTF stores rank 2-4, got ${rank}`);
  const n = dims.reduce((a, b) => a * b, 1);
  if (data.length !== n) {
    throw new Error(`payload has ${data.length} values, dims imply ${n}`);
  }
  const buf = Buffer.alloc(HEADER_SIZE + 8 * rank + 4 * n);
  buf.write(MAGIC, 0, "latin1");
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  view.setUint32(4, VERSION, true);
  view.setUint32(8, DTYPE_FLOAT32, true);
  view.setUint32(12, rank, true);
  for (let i = 0; i < rank; i++) {
    view.setBigUint64(HEADER_SIZE + 8 * i, BigInt(dims[i]), true);
  }
  const offset = HEADER_SIZE + 8 * rank;
  for (let i = 0; i < n; i++) view.setFloat32(offset + 4 * i, data[i], true);
  fs.writeFileSync(path, buf);
  if (metadata !== undefined) {
    fs.writeFileSync(path + ".json", JSON.stringify(metadata, null, 2) + "\n");
  }
}
