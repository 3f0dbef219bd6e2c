"""Text-similarity-guided pair sampling.

The first element of each mixup pair follows the class frequencies
(uniform over instances); the second is drawn from a temperature-scaled
softmax over text-feature similarities, renormalized over the other classes
so each row is a proper distribution with zero diagonal.
"""

from dataclasses import dataclass

import numpy as np

from .data import ClassCatalog, DataError, EmbeddingSet
from .seeds import derive_rng


@dataclass(frozen=True)
class LocalSamplingModel:
    """Pair-class distribution: p_first over the first class, p_cond rows
    over the second class given the first. Immutable and shareable."""

    tau: float
    p_first: np.ndarray
    p_cond: np.ndarray

    def __post_init__(self):
        p_first = np.asarray(self.p_first, dtype=np.float64)
        p_cond = np.asarray(self.p_cond, dtype=np.float64)
        C = p_first.shape[0]
        if p_cond.shape != (C, C):
            raise DataError("p_cond must be C x C")
        if abs(p_first.sum() - 1.0) > 1e-9 or np.any(p_first < 0):
            raise DataError("p_first must be a probability vector")
        if np.any(p_cond < 0) or np.any(np.diag(p_cond) != 0.0):
            raise DataError("p_cond must be nonnegative with exact zero diagonal")
        if np.any(np.abs(p_cond.sum(axis=1) - 1.0) > 1e-9):
            raise DataError("p_cond rows must sum to 1 within 1e-9")
        object.__setattr__(self, "p_first", p_first)
        object.__setattr__(self, "p_cond", p_cond)

    @property
    def num_classes(self) -> int:
        return self.p_first.shape[0]


def similarity_softmax_rows(similarities: np.ndarray, tau: float) -> np.ndarray:
    """Row-stochastic softmax over off-diagonal similarities.

    Row max is subtracted before exponentiation so small temperatures
    (e.g. tau=0.002 with similarities in [-1, 1]) cannot overflow.
    """
    if tau <= 0:
        raise DataError("temperature tau must be > 0")
    s = np.asarray(similarities, dtype=np.float64) / tau
    C = s.shape[0]
    if s.shape != (C, C):
        raise DataError("similarity matrix must be square")
    off = ~np.eye(C, dtype=bool)
    row_max = np.where(off, s, -np.inf).max(axis=1, keepdims=True)
    w = np.exp(s - row_max)
    w[~off] = 0.0
    return w / w.sum(axis=1, keepdims=True)


def build_sampling_model(catalog: ClassCatalog, tau: float) -> LocalSamplingModel:
    """p_first[k] = n_k / sum(n); p_cond rows from text-feature similarities."""
    if catalog.num_classes < 2:
        raise DataError("pair sampling needs at least 2 classes")
    sims = catalog.text_features @ catalog.text_features.T
    counts = catalog.counts.astype(np.float64)
    return LocalSamplingModel(
        tau=float(tau),
        p_first=counts / counts.sum(),
        p_cond=similarity_softmax_rows(sims, tau),
    )


def uniform_pair_model(counts: np.ndarray, uniform_first: bool = True) -> LocalSamplingModel:
    """Degenerate model for the standard-mixup arm: classes paired uniformly.

    p_cond is uniform over the other classes; p_first is either uniform over
    classes or the frequency distribution (tau is a placeholder, unused).
    """
    counts = np.asarray(counts, dtype=np.float64)
    C = counts.shape[0]
    p_cond = np.full((C, C), 1.0 / (C - 1))
    np.fill_diagonal(p_cond, 0.0)
    p_first = np.full(C, 1.0 / C) if uniform_first else counts / counts.sum()
    return LocalSamplingModel(tau=np.inf, p_first=p_first, p_cond=p_cond)


def effective_class_distribution(model: LocalSamplingModel) -> np.ndarray:
    """Probability that a sampled pair contains each class.

    The first and second pair members never share a class (zero diagonal),
    so the two events are disjoint and

        p(Y=y) = p_first[y] + sum_{k != y} p_first[k] * p_cond[k][y].

    Entries need not sum to 1: both pair members are observed. Every entry
    is >= p_first[y].
    """
    return model.p_first + model.p_first @ model.p_cond


def effective_imbalance_factor(model: LocalSamplingModel) -> float:
    """Ratio max/min of the pair-observation distribution (gamma-prime).

    Empirically this lands well below the raw count imbalance n_max/n_min on
    long-tailed counts; that is an observed property, not a theorem.
    """
    p = effective_class_distribution(model)
    return float(p.max() / p.min())


class PairStream:
    """Seeded stream of mixup pairs over one embedding set.

    First elements walk a fresh per-epoch shuffle of all row indices
    (sampling without replacement, class frequency = n_k / N); second
    elements draw a class from ``p_cond[first_class]`` by inverse CDF and
    then a uniform row of that class, with replacement. Single-owner mutable
    state: parallel workers should each hold their own stream with a derived
    seed.
    """

    def __init__(self, model: LocalSamplingModel, data: EmbeddingSet, seed,
                 uniform_first: bool = False):
        C = model.num_classes
        counts = data.class_counts(C)
        empty = np.nonzero(counts == 0)[0]
        if empty.size:
            raise DataError(f"class {int(empty[0])} has no rows to sample from")
        self.model = model
        self.data = data
        self.uniform_first = uniform_first
        if isinstance(seed, np.random.Generator):
            self._rng = seed
        else:
            self._rng = derive_rng(seed, "pair_stream")
        self._class_rows = [np.nonzero(data.labels == k)[0] for k in range(C)]
        self._cond_cdf = np.cumsum(model.p_cond, axis=1)
        self._cond_cdf[:, -1] = 1.0  # absorb cumsum rounding so u in [0,1) always lands
        self._order = np.empty(0, dtype=np.int64)
        self._pos = 0

    def _first_indices(self, n: int) -> np.ndarray:
        if self.uniform_first:
            classes = self._rng.integers(self.model.num_classes, size=n)
            return self._rows_for(classes)
        out = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            if self._pos >= len(self._order):
                self._order = self._rng.permutation(len(self.data))
                self._pos = 0
            take = min(n - filled, len(self._order) - self._pos)
            out[filled : filled + take] = self._order[self._pos : self._pos + take]
            self._pos += take
            filled += take
        return out

    def _rows_for(self, classes: np.ndarray) -> np.ndarray:
        rows = np.empty(len(classes), dtype=np.int64)
        for k in np.unique(classes):
            sel = np.nonzero(classes == k)[0]
            pool = self._class_rows[k]
            rows[sel] = pool[self._rng.integers(len(pool), size=sel.size)]
        return rows

    def draw_batch(self, n: int):
        """(rows_i, labels_i, rows_j, labels_j) for n pairs; labels always differ."""
        idx_i = self._first_indices(n)
        y_i = self.data.labels[idx_i]
        u = self._rng.random(n)
        # count of cdf entries <= u: never selects a zero-mass class, so the
        # zero diagonal guarantees y_j != y_i
        y_j = (u[:, None] >= self._cond_cdf[y_i]).sum(axis=1)
        idx_j = self._rows_for(y_j)
        return idx_i, y_i, idx_j, y_j

    def sample_pair(self):
        """One pair ((x_i, y_i), (x_j, y_j)) with y_i != y_j."""
        idx_i, y_i, idx_j, y_j = self.draw_batch(1)
        return (
            (self.data.features[idx_i[0]], int(y_i[0])),
            (self.data.features[idx_j[0]], int(y_j[0])),
        )
