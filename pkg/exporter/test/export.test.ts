import { mkdtemp, readFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import type { Dataset } from "../src/dataset.js";
import { HashStubEncoder, MarkerStubEncoder } from "../src/encoder.js";
import {
  buildPrompts, classCounts, exportCatalogFile, exportImageFeatures,
  exportTextFeatures,
} from "../src/export.js";
import { readEmbeddings } from "../src/format.js";

async function tmp(): Promise<string> {
  return mkdtemp(join(tmpdir(), "lfex-"));
}

function pixelDataset(classNames: string[], perClass: number): Dataset {
  const items = [];
  for (let k = 0; k < classNames.length; k++) {
    for (let i = 0; i < perClass; i++) {
      const data = new Uint8Array(48);
      data[0] = k; // marker byte used by stub:marker
      for (let b = 1; b < data.length; b++) data[b] = (k * 31 + i * 7 + b) % 256;
      items.push({ label: k, image: { kind: "pixels" as const, width: 4, height: 4, data } });
    }
  }
  return { classNames: [...classNames], items };
}

const NAMES = ["ant", "bee", "cat", "dog"];

describe("prompt templates", () => {
  it("fills {CLASS} exactly once", () => {
    expect(buildPrompts("a photo of a {CLASS}", ["dog"])).toEqual(["a photo of a dog"]);
  });

  it("rejects templates without exactly one {CLASS}", () => {
    expect(() => buildPrompts("a photo", NAMES)).toThrow(/exactly once/);
    expect(() => buildPrompts("{CLASS} or {CLASS}", NAMES)).toThrow(/exactly once/);
    expect(() => buildPrompts("a photo of a {CLASS}", [])).toThrow(/empty/);
  });
});

describe("text feature export", () => {
  it("writes unit-norm float32 rows", async () => {
    const doc = await exportTextFeatures(
      new HashStubEncoder(48), NAMES, [4, 3, 2, 1], "a photo of a {CLASS}");
    expect(doc.names).toEqual(NAMES);
    expect(doc.counts).toEqual([4, 3, 2, 1]);
    for (const row of doc.text_features) {
      const norm = Math.sqrt(row.reduce((s, v) => s + v * v, 0));
      expect(Math.abs(norm - 1)).toBeLessThan(1e-5);
      expect(row.length).toBe(48);
    }
  });

  it("re-running the job reproduces the catalog byte for byte", async () => {
    const dir = await tmp();
    const dataset = pixelDataset(NAMES, 3);
    const a = join(dir, "a.json");
    const b = join(dir, "b.json");
    await exportCatalogFile(new HashStubEncoder(32), dataset, "a photo of a {CLASS}", a);
    await exportCatalogFile(new HashStubEncoder(32), dataset, "a photo of a {CLASS}", b);
    expect(await readFile(a)).toEqual(await readFile(b));
  });
});

describe("class counts", () => {
  it("counts per class and rejects gaps", () => {
    expect(classCounts(pixelDataset(NAMES, 2))).toEqual([2, 2, 2, 2]);
    const gappy = pixelDataset(NAMES, 2);
    gappy.items = gappy.items.filter((x) => x.label !== 2);
    expect(() => classCounts(gappy)).toThrow(/cat has no samples/);
  });
});

describe("image feature export", () => {
  it("writes one aligned record per image, unit norm, deterministically", async () => {
    const dir = await tmp();
    const dataset = pixelDataset(NAMES, 5);
    const path = join(dir, "train.lfme");
    const stats = await exportImageFeatures(new HashStubEncoder(32), dataset, path, 3);
    expect(stats).toEqual({ records: 20, dim: 32 });

    const back = await readEmbeddings(path);
    expect(back.records.map((r) => r.label)).toEqual(dataset.items.map((x) => x.label));
    for (const rec of back.records) {
      let norm = 0;
      for (const v of rec.feature) norm += v * v;
      expect(Math.abs(Math.sqrt(norm) - 1)).toBeLessThan(1e-5);
    }

    const again = join(dir, "again.lfme");
    await exportImageFeatures(new HashStubEncoder(32), dataset, again, 7);
    expect(await readFile(path)).toEqual(await readFile(again));
  });

  it("marker stub aligns every image with its class prompt", async () => {
    const dir = await tmp();
    const dataset = pixelDataset(NAMES, 6);
    const encoder = new MarkerStubEncoder(NAMES, 24);
    const catalog = await exportTextFeatures(
      encoder, NAMES, classCounts(dataset), "a photo of a {CLASS}");
    const path = join(dir, "train.lfme");
    await exportImageFeatures(encoder, dataset, path);
    const back = await readEmbeddings(path);
    for (const rec of back.records) {
      const scores = catalog.text_features.map((proto) =>
        proto.reduce((s, v, i) => s + v * rec.feature[i]!, 0));
      expect(scores.indexOf(Math.max(...scores))).toBe(rec.label);
    }
  });
});
