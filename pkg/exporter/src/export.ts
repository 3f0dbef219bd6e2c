/**
 * Export orchestration: prompts -> catalog JSON, images -> embedding file.
 *
 * Labels in the embedding file index into the catalog's class order, counts
 * in the catalog are the training-split sample counts, and every stored row
 * is pre-normalized float32.
 */

import type { Dataset } from "./dataset.js";
import type { Encoder } from "./encoder.js";
import { CatalogDoc, normalizeToF32, writeCatalog, writeEmbeddings } from "./format.js";

export function buildPrompts(template: string, classNames: string[]): string[] {
  const pieces = template.split("{CLASS}");
  if (pieces.length !== 2) {
    throw new Error(`prompt template must contain "{CLASS}" exactly once: ${JSON.stringify(template)}`);
  }
  if (classNames.length === 0) throw new Error("class name list is empty");
  return classNames.map((name) => template.replace("{CLASS}", name));
}

export function classCounts(dataset: Dataset): number[] {
  const counts = new Array<number>(dataset.classNames.length).fill(0);
  for (const item of dataset.items) {
    if (item.label < 0 || item.label >= counts.length) {
      throw new Error(`label ${item.label} outside the ${counts.length}-class catalog`);
    }
    counts[item.label]! += 1;
  }
  const empty = counts.indexOf(0);
  if (empty >= 0) {
    throw new Error(`class ${dataset.classNames[empty]} has no samples in this split`);
  }
  return counts;
}

export async function exportTextFeatures(
  encoder: Encoder,
  classNames: string[],
  counts: number[],
  template: string,
): Promise<CatalogDoc> {
  const prompts = buildPrompts(template, classNames);
  const embeds = await encoder.encodeText(prompts);
  const rows = embeds.map((e) => Array.from(normalizeToF32(e)));
  return {
    names: [...classNames],
    counts: [...counts],
    prompt_template: template,
    text_features: rows,
  };
}

export interface ImageExportStats {
  records: number;
  dim: number;
}

export async function exportImageFeatures(
  encoder: Encoder,
  dataset: Dataset,
  path: string,
  batchSize: number = 256,
): Promise<ImageExportStats> {
  if (batchSize < 1) throw new Error("batch size must be >= 1");
  const items = dataset.items;

  async function* records() {
    for (let start = 0; start < items.length; start += batchSize) {
      const batch = items.slice(start, start + batchSize);
      const features = await encoder.encodeImages(batch.map((b) => b.image));
      if (features.length !== batch.length) {
        throw new Error("encoder returned the wrong number of features");
      }
      for (let i = 0; i < batch.length; i++) {
        yield { label: batch[i]!.label, feature: normalizeToF32(features[i]!) };
      }
    }
  }

  await writeEmbeddings(path, encoder.dim, items.length, records());
  return { records: items.length, dim: encoder.dim };
}

export async function exportCatalogFile(
  encoder: Encoder,
  dataset: Dataset,
  template: string,
  path: string,
): Promise<CatalogDoc> {
  const doc = await exportTextFeatures(
    encoder, dataset.classNames, classCounts(dataset), template);
  await writeCatalog(path, doc);
  return doc;
}
