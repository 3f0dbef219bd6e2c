/**
 * Dataset access: the CIFAR binary layouts, a folder-of-images mode, and a
 * checksummed download cache.
 *
 * CIFAR-10 binary records are [label u8][3072 bytes channel-major RGB];
 * CIFAR-100 records carry [coarse u8][fine u8][3072 bytes]. Class order is
 * the canonical one shipped with the datasets (CIFAR-100 fine labels are
 * alphabetical).
 */

import { createHash } from "node:crypto";
import { mkdir, readFile, readdir, stat, writeFile } from "node:fs/promises";
import { join } from "node:path";

import type { ImageSource } from "./encoder.js";

export interface LabeledImage {
  label: number;
  image: ImageSource;
}

export interface Dataset {
  classNames: string[];
  items: LabeledImage[];
}

export const CIFAR10_CLASSES = [
  "airplane", "automobile", "bird", "cat", "deer",
  "dog", "frog", "horse", "ship", "truck",
];

export const CIFAR100_CLASSES = [
  "apple", "aquarium_fish", "baby", "bear", "beaver", "bed", "bee", "beetle",
  "bicycle", "bottle", "bowl", "boy", "bridge", "bus", "butterfly", "camel",
  "can", "castle", "caterpillar", "cattle", "chair", "chimpanzee", "clock",
  "cloud", "cockroach", "couch", "crab", "crocodile", "cup", "dinosaur",
  "dolphin", "elephant", "flatfish", "forest", "fox", "girl", "hamster",
  "house", "kangaroo", "keyboard", "lamp", "lawn_mower", "leopard", "lion",
  "lizard", "lobster", "man", "maple_tree", "motorcycle", "mountain", "mouse",
  "mushroom", "oak_tree", "orange", "orchid", "otter", "palm_tree", "pear",
  "pickup_truck", "pine_tree", "plain", "plate", "poppy", "porcupine",
  "possum", "rabbit", "raccoon", "ray", "road", "rocket", "rose", "sea",
  "seal", "shark", "shrew", "skunk", "skyscraper", "snail", "snake", "spider",
  "squirrel", "streetcar", "sunflower", "sweet_pepper", "table",
  "tank", "telephone", "television", "tiger", "tractor", "train", "trout",
  "tulip", "turtle", "wardrobe", "whale", "willow_tree", "wolf", "woman",
  "worm",
];

const CIFAR_PIXELS = 3 * 32 * 32;

export function sha256Hex(bytes: Uint8Array): string {
  return createHash("sha256").update(bytes).digest("hex");
}

/**
 * Verify file checksums against an optional ``checksums.json`` sidecar in
 * the data dir ({"file.bin": "<sha256 hex>", ...}). Missing sidecar means
 * no verification; a mismatch is always fatal.
 */
async function verifyChecksum(dataDir: string, name: string, bytes: Uint8Array) {
  let sidecar: Record<string, string>;
  try {
    sidecar = JSON.parse(await readFile(join(dataDir, "checksums.json"), "utf-8"));
  } catch {
    return;
  }
  const expected = sidecar[name];
  if (expected === undefined) return;
  const actual = sha256Hex(bytes);
  if (actual !== expected.toLowerCase()) {
    throw new Error(`checksum mismatch for ${name}: expected ${expected}, got ${actual}`);
  }
}

function parseCifarRecords(bytes: Uint8Array, labelBytes: number,
                           fineLabelOffset: number, file: string): LabeledImage[] {
  const recordBytes = labelBytes + CIFAR_PIXELS;
  if (bytes.length === 0 || bytes.length % recordBytes !== 0) {
    throw new Error(`${file}: size ${bytes.length} is not a multiple of ${recordBytes}`);
  }
  const items: LabeledImage[] = [];
  for (let base = 0; base < bytes.length; base += recordBytes) {
    items.push({
      label: bytes[base + fineLabelOffset]!,
      image: {
        kind: "pixels",
        width: 32,
        height: 32,
        data: bytes.subarray(base + labelBytes, base + recordBytes),
      },
    });
  }
  return items;
}

async function readDataFile(dataDir: string, name: string): Promise<Uint8Array> {
  let bytes: Uint8Array;
  try {
    bytes = await readFile(join(dataDir, name));
  } catch (err) {
    throw new Error(
      `${name} not found under ${dataDir}; download the CIFAR binary archive ` +
      `and unpack it there (cause: ${(err as Error).message})`,
    );
  }
  await verifyChecksum(dataDir, name, bytes);
  return bytes;
}

export async function loadCifar10(dataDir: string, split: "train" | "test"): Promise<Dataset> {
  const files = split === "train"
    ? [1, 2, 3, 4, 5].map((i) => `data_batch_${i}.bin`)
    : ["test_batch.bin"];
  const items: LabeledImage[] = [];
  for (const name of files) {
    items.push(...parseCifarRecords(await readDataFile(dataDir, name), 1, 0, name));
  }
  return { classNames: [...CIFAR10_CLASSES], items };
}

export async function loadCifar100(dataDir: string, split: "train" | "test"): Promise<Dataset> {
  const name = split === "train" ? "train.bin" : "test.bin";
  const items = parseCifarRecords(await readDataFile(dataDir, name), 2, 1, name);
  return { classNames: [...CIFAR100_CLASSES], items };
}

/** Folder mode: one subdirectory per class (sorted order defines labels). */
export async function loadFolder(root: string): Promise<Dataset> {
  const entries = await readdir(root, { withFileTypes: true });
  const classNames = entries.filter((e) => e.isDirectory()).map((e) => e.name).sort();
  if (classNames.length === 0) {
    throw new Error(`${root}: no class subdirectories found`);
  }
  const items: LabeledImage[] = [];
  for (let label = 0; label < classNames.length; label++) {
    const dir = join(root, classNames[label]!);
    const files = (await readdir(dir)).sort();
    if (files.length === 0) throw new Error(`${dir}: class folder is empty`);
    for (const file of files) {
      const path = join(dir, file);
      items.push({ label, image: { kind: "file", path, bytes: await readFile(path) } });
    }
  }
  return { classNames, items };
}

export async function loadDataset(kind: string, dataDir: string,
                                  split: "train" | "test"): Promise<Dataset> {
  switch (kind) {
    case "cifar10":
      return loadCifar10(dataDir, split);
    case "cifar100":
      return loadCifar100(dataDir, split);
    case "folder":
      return loadFolder(join(dataDir, split));
    default:
      throw new Error(`unknown dataset kind ${JSON.stringify(kind)}`);
  }
}

/**
 * Fetch a URL into the cache dir unless a file with the right checksum is
 * already there; returns the cached path. The checksum is mandatory here:
 * a cached or fresh artifact that does not match is deleted and reported.
 */
export async function fetchToCache(url: string, sha256: string,
                                   cacheDir: string): Promise<string> {
  await mkdir(cacheDir, { recursive: true });
  const name = url.split("/").pop() || "download";
  const target = join(cacheDir, `${sha256.slice(0, 12)}-${name}`);
  try {
    await stat(target);
    const cached = await readFile(target);
    if (sha256Hex(cached) === sha256.toLowerCase()) return target;
    throw new Error("cached copy is corrupt");
  } catch {
    // fall through to (re-)download
  }
  const response = await fetch(url);
  if (!response.ok) {
    throw new Error(`download failed: ${url} -> HTTP ${response.status}`);
  }
  const bytes = new Uint8Array(await response.arrayBuffer());
  const actual = sha256Hex(bytes);
  if (actual !== sha256.toLowerCase()) {
    throw new Error(`checksum mismatch for ${url}: expected ${sha256}, got ${actual}`);
  }
  await writeFile(target, bytes);
  return target;
}
