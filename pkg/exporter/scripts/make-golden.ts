/**
 * Regenerate the committed golden fixtures: a 100-row embedding file plus
 * its catalog, produced by the deterministic stub:hash checkpoint over a
 * synthetic 10-class pixel dataset. The files pin the byte-level format
 * contract; the Python package's test suite reads them as CI fixtures.
 */

import { mkdir } from "node:fs/promises";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { Dataset } from "../src/dataset.js";
import { HashStubEncoder } from "../src/encoder.js";
import { exportCatalogFile, exportImageFeatures } from "../src/export.js";

export function goldenDataset(): Dataset {
  const classNames = Array.from({ length: 10 }, (_, k) => `golden_${k}`);
  const items = [];
  for (let k = 0; k < 10; k++) {
    for (let i = 0; i < 10; i++) {
      const data = new Uint8Array(4 * 4 * 3);
      for (let b = 0; b < data.length; b++) {
        data[b] = (k * 37 + i * 11 + b * 5) % 256;
      }
      items.push({ label: k, image: { kind: "pixels" as const, width: 4, height: 4, data } });
    }
  }
  return { classNames, items };
}

export async function writeGolden(outDir: string): Promise<void> {
  await mkdir(outDir, { recursive: true });
  const encoder = new HashStubEncoder(32);
  const dataset = goldenDataset();
  await exportCatalogFile(encoder, dataset, "a photo of a {CLASS}",
                          join(outDir, "golden-catalog.json"));
  await exportImageFeatures(encoder, dataset, join(outDir, "golden-100.lfme"));
  console.log(`wrote golden fixtures to ${outDir}`);
}

const invokedDirectly = process.argv[1] && process.argv[1].endsWith("make-golden.js");
if (invokedDirectly) {
  const here = dirname(fileURLToPath(import.meta.url));
  // dist/scripts -> fixtures at the package root
  await writeGolden(join(here, "..", "..", "fixtures"));
}
