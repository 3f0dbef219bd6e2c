/**
 * CLIP backend via transformers.js (optional dependency).
 *
 * Inference runs in eval mode and is deterministic, so re-running an export
 * against the same checkpoint reproduces the catalog byte for byte. Weights
 * are fetched and cached by the library itself; install the optional
 * dependency first:
 *
 *     npm install @xenova/transformers
 *
 * This module is intentionally isolated behind a dynamic import so the rest
 * of the exporter (and its test suite) works fully offline.
 */

import type { Encoder, ImageSource } from "./encoder.js";

// untyped on purpose: @xenova/transformers is an optional dependency and
// must not be needed to compile or test the exporter offline
type TransformersModule = any;

export class ClipEncoder implements Encoder {
  private constructor(
    readonly id: string,
    readonly dim: number,
    private readonly lib: TransformersModule,
    private readonly tokenizer: any,
    private readonly textModel: any,
    private readonly processor: any,
    private readonly visionModel: any,
  ) {}

  static async load(checkpoint: string): Promise<ClipEncoder> {
    let lib: TransformersModule;
    try {
      lib = await import("@xenova/transformers" as string);
    } catch {
      throw new Error(
        "checkpoint backends need the optional dependency @xenova/transformers " +
        "(npm install @xenova/transformers); offline runs can use stub:hash or stub:marker",
      );
    }
    const tokenizer = await lib.AutoTokenizer.from_pretrained(checkpoint);
    const textModel = await lib.CLIPTextModelWithProjection.from_pretrained(checkpoint);
    const processor = await lib.AutoProcessor.from_pretrained(checkpoint);
    const visionModel = await lib.CLIPVisionModelWithProjection.from_pretrained(checkpoint);
    const dim = Number(textModel.config.projection_dim ?? 512);
    return new ClipEncoder(checkpoint, dim, lib, tokenizer, textModel, processor, visionModel);
  }

  async encodeText(prompts: string[]): Promise<Float32Array[]> {
    const tokens = this.tokenizer(prompts, { padding: true, truncation: true });
    const { text_embeds } = await this.textModel(tokens);
    return splitRows(text_embeds.data as Float32Array, prompts.length, this.dim);
  }

  async encodeImages(images: ImageSource[]): Promise<Float32Array[]> {
    const raws = await Promise.all(images.map((img) => this.toRawImage(img)));
    const inputs = await this.processor(raws);
    const { image_embeds } = await this.visionModel(inputs);
    return splitRows(image_embeds.data as Float32Array, images.length, this.dim);
  }

  private async toRawImage(img: ImageSource) {
    const { RawImage } = this.lib;
    if (img.kind === "file") {
      return RawImage.fromBlob(new Blob([Uint8Array.from(img.bytes)]));
    }
    // CIFAR stores channel-major RGB; RawImage expects interleaved
    const { width, height, data } = img;
    const plane = width * height;
    const interleaved = new Uint8ClampedArray(plane * 3);
    for (let p = 0; p < plane; p++) {
      interleaved[3 * p] = data[p]!;
      interleaved[3 * p + 1] = data[plane + p]!;
      interleaved[3 * p + 2] = data[2 * plane + p]!;
    }
    return new RawImage(interleaved, width, height, 3);
  }
}

function splitRows(flat: Float32Array, rows: number, dim: number): Float32Array[] {
  if (flat.length !== rows * dim) {
    throw new Error(`model returned ${flat.length} values, expected ${rows * dim}`);
  }
  const out: Float32Array[] = [];
  for (let r = 0; r < rows; r++) out.push(flat.slice(r * dim, (r + 1) * dim));
  return out;
}
