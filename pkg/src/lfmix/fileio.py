"""Embedding file (LFME binary) and class catalog (JSON) round-trip.

Binary layout, little-endian:

    magic   4 bytes  b"LFME"
    version u16      1
    dim     u32
    count   u64
    records count * [label u32][dim * f32]

Features are stored as float32; readers re-normalize defensively in float64
because a unit vector only survives the f32 round-trip to ~1e-6.
"""

import json
import struct
from pathlib import Path

import numpy as np

from .data import ClassCatalog, DataError, EmbeddingSet, normalize_rows

MAGIC = b"LFME"
VERSION = 1
_HEADER = struct.Struct("<4sHIQ")

# how far a stored "unit" row may stray before we call the file corrupt
_RAW_NORM_TOL = 1e-3
# rows already inside the strict invariant are kept verbatim so that
# read -> write reproduces a conforming file bit for bit
_STRICT_NORM_TOL = 1e-6


def _defensive_normalize(rows: np.ndarray, where: str) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1)
    if not np.all(np.isfinite(norms)) or np.any(np.abs(norms - 1.0) > _RAW_NORM_TOL):
        raise DataError(f"{where}: stored features are not unit norm within {_RAW_NORM_TOL}")
    if np.all(np.abs(norms - 1.0) <= _STRICT_NORM_TOL):
        return rows
    return normalize_rows(rows)


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("feature", "<f4", (dim,))])


def write_embeddings(path, data: EmbeddingSet) -> None:
    path = Path(path)
    records = np.empty(len(data), dtype=_record_dtype(data.dim))
    records["label"] = data.labels.astype(np.uint32)
    records["feature"] = data.features.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, data.dim, len(data)))
        fh.write(records.tobytes())


def read_embeddings(path, split_tag: str = "train") -> EmbeddingSet:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataError(f"{path}: truncated embedding file")
    magic, version, dim, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    body = blob[_HEADER.size :]
    expect = count * _record_dtype(dim).itemsize
    if len(body) != expect:
        raise DataError(f"{path}: payload is {len(body)} bytes, expected {expect}")
    records = np.frombuffer(body, dtype=_record_dtype(dim))
    feats = records["feature"].astype(np.float64)
    return EmbeddingSet(
        dim=int(dim),
        features=_defensive_normalize(feats, str(path)),
        labels=records["label"].astype(np.int64),
        split_tag=split_tag,
    )


def write_catalog(path, catalog: ClassCatalog) -> None:
    doc = {
        "names": list(catalog.names),
        "counts": [int(c) for c in catalog.counts],
        "prompt_template": catalog.prompt_template,
        "text_features": [[float(v) for v in row] for row in catalog.text_features],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def read_catalog(path) -> ClassCatalog:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    missing = {"names", "counts", "prompt_template", "text_features"} - set(doc)
    if missing:
        raise DataError(f"{path}: catalog missing keys {sorted(missing)}")
    try:
        feats = np.asarray(doc["text_features"], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"{path}: text_features must be a rectangular matrix ({exc})") from exc
    if feats.ndim != 2:
        raise DataError(f"{path}: text_features must be a rectangular matrix")
    return ClassCatalog(
        names=tuple(doc["names"]),
        counts=np.asarray(doc["counts"], dtype=np.int64),
        text_features=_defensive_normalize(feats, str(path)),
        prompt_template=str(doc["prompt_template"]),
    )
