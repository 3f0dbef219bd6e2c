"""Core data types, long-tailed subset construction and the synthetic benchmark.

Features are stored row-wise as float64 arrays and are unit L2 norm
(tolerance 1e-6). Class catalogs carry the frozen text-prompt features next
to the per-class training counts so samplers and losses can be built without
touching the raw data again.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .seeds import derive_rng

UNIT_NORM_ATOL = 1e-6


class DataError(ValueError):
    """Raised when inputs violate a documented data contract."""


def _check_unit_rows(rows: np.ndarray, what: str, atol: float = UNIT_NORM_ATOL):
    if not np.all(np.isfinite(rows)):
        raise DataError(f"{what} contain non-finite values")
    norms = np.linalg.norm(rows, axis=-1)
    bad = np.abs(norms - 1.0) > atol
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DataError(f"{what}[{k}] has L2 norm {norms[k]:.8f}, expected 1 within {atol}")


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    """Project rows onto the unit sphere; zero rows are a contract violation."""
    rows = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(rows)):
        raise DataError("cannot normalize non-finite rows")
    norms = np.linalg.norm(rows, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("cannot normalize zero-norm rows")
    return rows / norms


@dataclass(frozen=True)
class EmbeddingSet:
    """Labeled unit-norm feature rows for one split.

    ``features`` is (N, dim) float64, ``labels`` is (N,) int64. Instances are
    immutable after construction and safe to share across workers.
    """

    dim: int
    features: np.ndarray
    labels: np.ndarray
    split_tag: str = "train"

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        if self.dim <= 0:
            raise DataError("dim must be positive")
        if feats.ndim != 2 or feats.shape[1] != self.dim:
            raise DataError(f"features must be (N, {self.dim}), got {feats.shape}")
        if labels.shape != (feats.shape[0],):
            raise DataError("labels must align with feature rows")
        if np.any(labels < 0):
            raise DataError("labels must be nonnegative")
        if self.split_tag not in ("train", "val"):
            raise DataError(f"split_tag must be 'train' or 'val', got {self.split_tag!r}")
        _check_unit_rows(feats, "features")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    def class_counts(self, num_classes: int) -> np.ndarray:
        if np.any(self.labels >= num_classes):
            raise DataError(f"label {int(self.labels.max())} out of range for C={num_classes}")
        return np.bincount(self.labels, minlength=num_classes)


@dataclass(frozen=True)
class ClassCatalog:
    """Ordered class names, per-class training counts and frozen text features.

    ``counts`` need not be sorted; the head-to-tail ordering is a view
    (ties broken by class index), not a storage requirement.
    """

    names: tuple
    counts: np.ndarray
    text_features: np.ndarray
    prompt_template: str = "a photo of a {CLASS}"

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        counts = np.ascontiguousarray(np.asarray(self.counts, dtype=np.int64))
        feats = np.ascontiguousarray(np.asarray(self.text_features, dtype=np.float64))
        if len(names) < 1:
            raise DataError("catalog needs at least one class")
        if counts.shape != (len(names),):
            raise DataError("counts must have one entry per class")
        if np.any(counts < 1):
            raise DataError("all class counts must be >= 1")
        if feats.ndim != 2 or feats.shape[0] != len(names):
            raise DataError("text_features must have one row per class")
        _check_unit_rows(feats, "text_features")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "text_features", feats)

    @property
    def num_classes(self) -> int:
        return len(self.names)

    @property
    def dim(self) -> int:
        return self.text_features.shape[1]

    def with_counts(self, counts) -> "ClassCatalog":
        return replace(self, counts=np.asarray(counts, dtype=np.int64))

    def sorted_view(self) -> np.ndarray:
        """Class indices ordered head to tail (count desc, index asc on ties)."""
        return np.lexsort((np.arange(self.num_classes), -self.counts))


@dataclass(frozen=True)
class LongTailSpec:
    """Exponential long-tail profile: largest class n_max, imbalance factor gamma."""

    n_max: int
    gamma: float
    num_classes: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise DataError("long-tail profile needs at least 2 classes")
        if self.gamma < 1.0:
            raise DataError("imbalance factor gamma must be >= 1")
        if self.n_max < self.gamma:
            raise DataError("n_max must be >= gamma so the smallest class keeps >= 1 sample")


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in for real vision-language embeddings.

    Paired classes get prototypes at cosine ``pair_cosine`` (>= 0.8); all
    other prototype pairs are exactly orthogonal. Image rows are noisy copies
    of their prototype, re-normalized.
    """

    num_classes: int
    dim: int
    pair_groups: tuple = ()
    intra_noise: float = 0.3
    seed: int = 0
    train_per_class: int = 200
    val_per_class: int = 50
    pair_cosine: float = 0.85

    def __post_init__(self):
        if self.dim < 3 or self.num_classes < 4:
            raise DataError("synthetic benchmark requires dim >= 3 and C >= 4")
        if self.num_classes > self.dim:
            # orthogonal prototypes are only constructible for C <= dim
            raise DataError("synthetic benchmark requires C <= dim")
        flat = [i for pair in self.pair_groups for i in pair]
        if len(set(flat)) != len(flat):
            raise DataError("pair_groups indices must be distinct")
        if flat and (min(flat) < 0 or max(flat) >= self.num_classes):
            raise DataError("pair_groups indices must be in [0, C)")
        if any(len(pair) != 2 for pair in self.pair_groups):
            raise DataError("pair_groups must contain index pairs")
        if not 0.8 <= self.pair_cosine < 1.0:
            raise DataError("pair_cosine must be in [0.8, 1)")
        if self.intra_noise < 0:
            raise DataError("intra_noise must be >= 0")
        if self.train_per_class < 1 or self.val_per_class < 1:
            raise DataError("per-class sample counts must be >= 1")
        object.__setattr__(self, "pair_groups", tuple(tuple(int(i) for i in p) for p in self.pair_groups))


def build_longtail_counts(spec: LongTailSpec) -> np.ndarray:
    """Per-class sample counts: floor(n_max * gamma^(-k/(C-1))) for k in [0, C).

    Nonincreasing, counts[0] == n_max. Reproduces the published CIFAR-LT
    totals (e.g. 12,406 at C=10, n_max=5000, gamma=100).
    """
    k = np.arange(spec.num_classes, dtype=np.float64)
    decay = spec.gamma ** (-k / (spec.num_classes - 1))
    counts = np.floor(spec.n_max * decay).astype(np.int64)
    return counts


def subset_longtail(data: EmbeddingSet, catalog: ClassCatalog, counts, seed: int):
    """Seeded-random per-class subset with exactly ``counts[k]`` rows of class k.

    Returns (subset, catalog with updated counts). Selection is random rather
    than first-n; which rows of the source survive is part of the contract
    only through the seed.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.shape != (catalog.num_classes,):
        raise DataError("counts must have one entry per catalog class")
    if np.any(counts < 1):
        raise DataError("requested counts must be >= 1")
    available = data.class_counts(catalog.num_classes)
    short = np.nonzero(available < counts)[0]
    if short.size:
        k = int(short[0])
        raise DataError(
            f"class {k} ({catalog.names[k]!r}) has {int(available[k])} rows, "
            f"requested {int(counts[k])}"
        )
    rng = derive_rng(seed, "subset_longtail")
    keep = []
    for k in range(catalog.num_classes):
        rows = np.nonzero(data.labels == k)[0]
        keep.append(rng.permutation(rows)[: counts[k]])
    keep = np.sort(np.concatenate(keep))
    subset = EmbeddingSet(
        dim=data.dim,
        features=data.features[keep],
        labels=data.labels[keep],
        split_tag=data.split_tag,
    )
    return subset, catalog.with_counts(counts)


def _haar_orthonormal(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))


def generate_synthetic(spec: SyntheticSpec):
    """Build (train, val, catalog) with the documented prototype geometry.

    Prototypes start from a Haar-random orthonormal frame; each pair group
    (a, b) rotates prototype b towards a so cos(f_a, f_b) == pair_cosine
    while staying orthogonal to every other class. Text features are the
    prototypes themselves; image rows are normalize(prototype + N(0, sigma^2)).
    """
    rng = derive_rng(spec.seed, "synthetic")
    frame = _haar_orthonormal(rng, spec.dim)[: spec.num_classes]
    protos = frame.copy()
    cos_t = spec.pair_cosine
    sin_t = np.sqrt(1.0 - cos_t * cos_t)
    for a, b in spec.pair_groups:
        protos[b] = cos_t * frame[a] + sin_t * frame[b]

    def draw_split(per_class: int, tag: str) -> EmbeddingSet:
        feats = np.empty((spec.num_classes * per_class, spec.dim))
        labels = np.repeat(np.arange(spec.num_classes), per_class)
        for k in range(spec.num_classes):
            noise = spec.intra_noise * rng.standard_normal((per_class, spec.dim))
            feats[k * per_class : (k + 1) * per_class] = normalize_rows(protos[k] + noise)
        return EmbeddingSet(dim=spec.dim, features=feats, labels=labels, split_tag=tag)

    train = draw_split(spec.train_per_class, "train")
    val = draw_split(spec.val_per_class, "val")
    catalog = ClassCatalog(
        names=tuple(f"class_{k:02d}" for k in range(spec.num_classes)),
        counts=np.full(spec.num_classes, spec.train_per_class, dtype=np.int64),
        text_features=protos,
    )
    return train, val, catalog
