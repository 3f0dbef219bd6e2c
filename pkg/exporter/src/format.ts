/**
 * Embedding file (LFME binary) and class catalog (JSON) writers.
 *
 * Binary layout, little-endian:
 *
 *     magic   4 bytes  "LFME"
 *     version u16      1
 *     dim     u32
 *     count   u64
 *     records count * [label u32][dim * f32]
 *
 * Features are normalized in float64 and stored as float32, so a stored row
 * keeps unit norm to ~1e-7 and the consumer can take it verbatim.
 */

import { createWriteStream } from "node:fs";
import { readFile, writeFile } from "node:fs/promises";
import { once } from "node:events";

export const MAGIC = "LFME";
export const VERSION = 1;
export const HEADER_BYTES = 4 + 2 + 4 + 8;

export interface EmbeddingRecord {
  label: number;
  feature: Float32Array;
}

export interface CatalogDoc {
  names: string[];
  counts: number[];
  prompt_template: string;
  text_features: number[][];
}

/** Normalize in float64, then round to float32 storage precision. */
export function normalizeToF32(feature: ArrayLike<number>): Float32Array {
  let sumSquares = 0;
  for (let i = 0; i < feature.length; i++) {
    const v = feature[i]!;
    if (!Number.isFinite(v)) throw new Error("feature contains non-finite values");
    sumSquares += v * v;
  }
  const norm = Math.sqrt(sumSquares);
  if (norm === 0) throw new Error("cannot normalize a zero feature");
  const out = new Float32Array(feature.length);
  for (let i = 0; i < feature.length; i++) out[i] = Math.fround(feature[i]! / norm);
  return out;
}

export function encodeHeader(dim: number, count: number): Buffer {
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt32LE(dim, 6);
  header.writeBigUInt64LE(BigInt(count), 10);
  return header;
}

export function encodeRecord(dim: number, record: EmbeddingRecord): Buffer {
  if (record.feature.length !== dim) {
    throw new Error(`record dim ${record.feature.length} != file dim ${dim}`);
  }
  const buf = Buffer.alloc(4 + 4 * dim);
  buf.writeUInt32LE(record.label >>> 0, 0);
  for (let i = 0; i < dim; i++) buf.writeFloatLE(record.feature[i]!, 4 + 4 * i);
  return buf;
}

/** Stream records to disk; ``records`` may be any (async) iterable. */
export async function writeEmbeddings(
  path: string,
  dim: number,
  count: number,
  records: Iterable<EmbeddingRecord> | AsyncIterable<EmbeddingRecord>,
): Promise<void> {
  const stream = createWriteStream(path);
  let written = 0;
  try {
    if (!stream.write(encodeHeader(dim, count))) await once(stream, "drain");
    for await (const record of records) {
      written += 1;
      if (written > count) throw new Error(`more than ${count} records supplied`);
      if (!stream.write(encodeRecord(dim, record))) await once(stream, "drain");
    }
    if (written !== count) {
      throw new Error(`expected ${count} records, got ${written}`);
    }
  } finally {
    stream.end();
    await once(stream, "close");
  }
}

/** Reader used by the exporter's own tests; the Python package is the
 * production consumer. */
export async function readEmbeddings(path: string): Promise<{
  dim: number;
  records: EmbeddingRecord[];
}> {
  const blob = await readFile(path);
  if (blob.length < HEADER_BYTES) throw new Error(`${path}: truncated file`);
  if (blob.toString("ascii", 0, 4) !== MAGIC) throw new Error(`${path}: bad magic`);
  if (blob.readUInt16LE(4) !== VERSION) throw new Error(`${path}: bad version`);
  const dim = blob.readUInt32LE(6);
  const count = Number(blob.readBigUInt64LE(10));
  const recordBytes = 4 + 4 * dim;
  if (blob.length !== HEADER_BYTES + count * recordBytes) {
    throw new Error(`${path}: payload size mismatch`);
  }
  const records: EmbeddingRecord[] = [];
  for (let r = 0; r < count; r++) {
    const base = HEADER_BYTES + r * recordBytes;
    const feature = new Float32Array(dim);
    for (let i = 0; i < dim; i++) feature[i] = blob.readFloatLE(base + 4 + 4 * i);
    records.push({ label: blob.readUInt32LE(base), feature });
  }
  return { dim, records };
}

export async function writeCatalog(path: string, doc: CatalogDoc): Promise<void> {
  if (doc.names.length !== doc.counts.length || doc.names.length !== doc.text_features.length) {
    throw new Error("catalog arrays must have one entry per class");
  }
  await writeFile(path, JSON.stringify(doc, null, 1) + "\n");
}
