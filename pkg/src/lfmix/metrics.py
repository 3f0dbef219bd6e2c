"""Shot-split evaluation: many/medium/few/overall top-1 accuracy.

Group membership is decided purely by the training-split class counts:
many-shot above 100 samples, few-shot below 20, medium between (inclusive).
The overall accuracy is total-correct over total rows, never the mean of
the three group accuracies. Empty groups report None instead of 0 so small
benchmarks cannot skew comparisons.
"""

from dataclasses import dataclass

import numpy as np

from .data import ClassCatalog, DataError, EmbeddingSet
from .model import TrainedHead, cosine_logits, map_features

GROUPS = ("many", "medium", "few")


@dataclass(frozen=True)
class ShotSplit:
    """Per-class group label plus the thresholds that produced it."""

    categories: tuple
    many_above: int = 100
    few_below: int = 20


def shot_split(counts, many_above: int = 100, few_below: int = 20) -> ShotSplit:
    counts = np.asarray(counts, dtype=np.int64)
    if np.any(counts < 1):
        raise DataError("class counts must be >= 1")
    cats = np.where(counts > many_above, "many", np.where(counts < few_below, "few", "medium"))
    return ShotSplit(categories=tuple(str(c) for c in cats),
                     many_above=many_above, few_below=few_below)


@dataclass(frozen=True)
class EvalReport:
    """Top-1 accuracies in percent (None for empty groups), confusion matrix
    with rows = true class and columns = predicted class, per-class accuracy."""

    many: float | None
    medium: float | None
    few: float | None
    overall: float
    per_class: tuple
    confusion: np.ndarray

    def to_dict(self, digits: int | None = 1) -> dict:
        def fmt(x):
            if x is None:
                return None
            return round(float(x), digits) if digits is not None else float(x)

        return {
            "many": fmt(self.many),
            "med": fmt(self.medium),
            "few": fmt(self.few),
            "all": fmt(self.overall),
            "per_class": [fmt(a) for a in self.per_class],
            "confusion": self.confusion.tolist(),
        }


def predictions(head: TrainedHead, data: EmbeddingSet, catalog: ClassCatalog) -> np.ndarray:
    """Vectorized argmax predictions over one embedding set."""
    feats = map_features(head, data.features)
    return np.argmax(cosine_logits(feats, catalog, head.logit_scale), axis=1)


def evaluate(head: TrainedHead, val: EmbeddingSet, catalog: ClassCatalog,
             split: ShotSplit) -> EvalReport:
    """Score the head on a validation split.

    Confusion matrix orientation is fixed here as rows = true class,
    columns = predicted class; transpose if a tool expects the opposite
    convention.
    """
    C = catalog.num_classes
    if len(split.categories) != C:
        raise DataError("shot split does not match catalog size")
    val.class_counts(C)
    preds = predictions(head, val, catalog)
    truth = val.labels

    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (truth, preds), 1)

    row_totals = confusion.sum(axis=1)
    diag = np.diag(confusion)
    per_class = tuple(
        100.0 * diag[k] / row_totals[k] if row_totals[k] else None for k in range(C)
    )

    def group_accuracy(name):
        members = [k for k in range(C) if split.categories[k] == name]
        total = int(row_totals[members].sum()) if members else 0
        if total == 0:
            return None
        return 100.0 * int(diag[members].sum()) / total

    overall = 100.0 * int(diag.sum()) / int(row_totals.sum())
    report = EvalReport(
        many=group_accuracy("many"),
        medium=group_accuracy("medium"),
        few=group_accuracy("few"),
        overall=overall,
        per_class=per_class,
        confusion=confusion,
    )
    _check_accounting(report, split)
    return report


def _check_accounting(report: EvalReport, split: ShotSplit) -> None:
    # overall must recombine exactly from the group tallies
    row_totals = report.confusion.sum(axis=1)
    diag = np.diag(report.confusion)
    correct = total = 0
    for name in GROUPS:
        members = [k for k in range(len(split.categories)) if split.categories[k] == name]
        correct += int(diag[members].sum())
        total += int(row_totals[members].sum())
    recombined = 100.0 * correct / total
    if abs(recombined - report.overall) > 1e-9:
        raise AssertionError("group accuracies do not recombine to the overall accuracy")
