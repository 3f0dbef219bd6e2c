/**
 * export CLI: encode a dataset and its class prompts into the lfmix formats.
 *
 *   lfmix-export --dataset cifar100 --data-dir ./cifar-100-binary \
 *     --checkpoint Xenova/clip-vit-base-patch32 \
 *     --template "a photo of a {CLASS}" --out ./export
 *
 * Writes <out>/<split>.lfme plus, for the train split, <out>/catalog.json
 * (counts are the train-split sample counts). stub:hash / stub:marker run
 * fully offline.
 */

import { mkdir, writeFile } from "node:fs/promises";
import { join } from "node:path";
import { parseArgs } from "node:util";

import { loadDataset } from "./dataset.js";
import { loadEncoder } from "./encoder.js";
import { exportCatalogFile, exportImageFeatures } from "./export.js";

export interface ExportJob {
  dataset: string;
  dataDir: string;
  checkpoint: string;
  template: string;
  out: string;
  split: "train" | "test";
  batchSize: number;
  limitPerClass: number | null;
  dim: number;
}

export async function runExport(job: ExportJob): Promise<void> {
  const dataset = await loadDataset(job.dataset, job.dataDir, job.split);
  if (job.limitPerClass !== null) {
    const kept = new Map<number, number>();
    dataset.items = dataset.items.filter((item) => {
      const n = kept.get(item.label) ?? 0;
      kept.set(item.label, n + 1);
      return n < job.limitPerClass!;
    });
  }
  const encoder = await loadEncoder(job.checkpoint, dataset.classNames, job.dim);
  await mkdir(job.out, { recursive: true });

  if (job.split === "train") {
    await exportCatalogFile(encoder, dataset, job.template, join(job.out, "catalog.json"));
  }
  const stats = await exportImageFeatures(
    encoder, dataset, join(job.out, `${job.split}.lfme`), job.batchSize);
  await writeFile(join(job.out, `manifest-${job.split}.json`), JSON.stringify({
    command: "export",
    config: {
      dataset: job.dataset,
      data_dir: job.dataDir,
      checkpoint: encoder.id,
      template: job.template,
      split: job.split,
      batch_size: job.batchSize,
      limit_per_class: job.limitPerClass,
      dim: stats.dim,
    },
    records: stats.records,
  }, null, 1) + "\n");
  console.log(`wrote ${stats.records} records (dim ${stats.dim}) to ${job.out}`);
}

export function parseCliArgs(argv: string[]): ExportJob {
  const { values } = parseArgs({
    args: argv,
    options: {
      dataset: { type: "string" },
      "data-dir": { type: "string" },
      checkpoint: { type: "string", default: "stub:hash" },
      template: { type: "string", default: "a photo of a {CLASS}" },
      out: { type: "string" },
      split: { type: "string", default: "train" },
      "batch-size": { type: "string", default: "256" },
      "limit-per-class": { type: "string" },
      dim: { type: "string", default: "64" },
    },
  });
  for (const key of ["dataset", "data-dir", "out"] as const) {
    if (!values[key]) throw new Error(`--${key} is required`);
  }
  if (values.split !== "train" && values.split !== "test") {
    throw new Error("--split must be train or test");
  }
  return {
    dataset: values.dataset!,
    dataDir: values["data-dir"]!,
    checkpoint: values.checkpoint!,
    template: values.template!,
    out: values.out!,
    split: values.split,
    batchSize: Number(values["batch-size"]),
    limitPerClass: values["limit-per-class"] ? Number(values["limit-per-class"]) : null,
    dim: Number(values.dim),
  };
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop()!);

if (invokedDirectly) {
  runExport(parseCliArgs(process.argv.slice(2))).catch((err) => {
    console.error(`export error: ${err.message}`);
    process.exitCode = 1;
  });
}
