/**
 * Encoder backends.
 *
 * An encoder turns class prompts and images into d-dimensional features.
 * Checkpoint ids select the backend:
 *
 *   - "stub:hash"    deterministic offline stand-in: features are seeded by
 *                    a SHA-256 of the input, unrelated across modalities.
 *                    Good for format/pipeline tests, useless for accuracy.
 *   - "stub:marker"  offline stand-in that behaves like a perfectly aligned
 *                    checkpoint: the first byte of an image picks a class
 *                    prototype and prompts map to the same prototypes, so
 *                    zero-shot evaluation of an export is exact. Used to
 *                    validate label/catalog alignment end to end.
 *   - anything else  treated as a CLIP checkpoint id for transformers.js
 *                    (e.g. "Xenova/clip-vit-base-patch32"); requires the
 *                    optional @xenova/transformers dependency and network
 *                    access to fetch weights.
 */

import { createHash } from "node:crypto";

export interface PixelImage {
  kind: "pixels";
  width: number;
  height: number;
  /** channel-major RGB, as stored in the CIFAR binaries */
  data: Uint8Array;
}

export interface FileImage {
  kind: "file";
  path: string;
  bytes: Uint8Array;
}

export type ImageSource = PixelImage | FileImage;

export interface Encoder {
  readonly dim: number;
  readonly id: string;
  encodeText(prompts: string[]): Promise<Float32Array[]>;
  encodeImages(images: ImageSource[]): Promise<Float32Array[]>;
}

function imageBytes(image: ImageSource): Uint8Array {
  return image.kind === "pixels" ? image.data : image.bytes;
}

/** splitmix32 over a SHA-256 seed; Box-Muller for gaussian coordinates. */
class SeededGaussian {
  private state: number;

  constructor(seed: string) {
    this.state = createHash("sha256").update(seed).digest().readUInt32LE(0);
  }

  private next(): number {
    this.state = (this.state + 0x9e3779b9) >>> 0;
    let z = this.state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    z = (z ^ (z >>> 15)) >>> 0;
    return (z + 0.5) / 4294967296;
  }

  gaussian(): number {
    return Math.sqrt(-2 * Math.log(this.next())) * Math.cos(2 * Math.PI * this.next());
  }

  vector(dim: number): Float64Array {
    const out = new Float64Array(dim);
    for (let i = 0; i < dim; i++) out[i] = this.gaussian();
    return out;
  }
}

function unitVector(seed: string, dim: number): Float64Array {
  const v = new SeededGaussian(seed).vector(dim);
  let norm = 0;
  for (const x of v) norm += x * x;
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) v[i]! /= norm;
  return v;
}

export class HashStubEncoder implements Encoder {
  readonly id = "stub:hash";

  constructor(readonly dim: number = 64) {}

  async encodeText(prompts: string[]): Promise<Float32Array[]> {
    return prompts.map((p) => Float32Array.from(unitVector(`text:${p}`, this.dim)));
  }

  async encodeImages(images: ImageSource[]): Promise<Float32Array[]> {
    return images.map((img) => {
      const digest = createHash("sha256").update(imageBytes(img)).digest("hex");
      return Float32Array.from(unitVector(`image:${digest}`, this.dim));
    });
  }
}

export class MarkerStubEncoder implements Encoder {
  readonly id = "stub:marker";
  private prototypes: Float64Array[];

  constructor(readonly classNames: string[], readonly dim: number = 64,
              readonly noise: number = 0.05) {
    this.prototypes = classNames.map((_, k) => unitVector(`marker-proto:${k}`, dim));
  }

  async encodeText(prompts: string[]): Promise<Float32Array[]> {
    return prompts.map((prompt) => {
      const k = this.classNames.findIndex((name) => prompt.includes(name));
      if (k < 0) throw new Error(`prompt ${JSON.stringify(prompt)} names no known class`);
      return Float32Array.from(this.prototypes[k]!);
    });
  }

  async encodeImages(images: ImageSource[]): Promise<Float32Array[]> {
    return images.map((img) => {
      const bytes = imageBytes(img);
      if (bytes.length === 0) throw new Error("cannot encode an empty image");
      const k = bytes[0]! % this.classNames.length;
      const digest = createHash("sha256").update(bytes).digest("hex");
      const jitter = new SeededGaussian(`marker-noise:${digest}`);
      const proto = this.prototypes[k]!;
      const out = new Float32Array(this.dim);
      for (let i = 0; i < this.dim; i++) {
        out[i] = proto[i]! + this.noise * jitter.gaussian();
      }
      return out;
    });
  }
}

export async function loadEncoder(checkpoint: string, classNames: string[],
                                  dim: number): Promise<Encoder> {
  if (checkpoint === "stub:hash") return new HashStubEncoder(dim);
  if (checkpoint === "stub:marker") return new MarkerStubEncoder(classNames, dim);
  const { ClipEncoder } = await import("./clip.js");
  return ClipEncoder.load(checkpoint);
}
