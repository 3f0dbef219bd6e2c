"""Shared desk-scale benchmark protocol used by the unit and acceptance tests.

C=20 classes, d=32, imbalance factor 100 (counts 500 down to 5), with six
pair groups tying few-shot classes to many/medium donors. On this setup the
shot groups come out 7 many / 7 medium / 6 few.
"""

import numpy as np

from lfmix import (LongTailSpec, StageConfig, SyntheticSpec, TrainConfig,
                   build_longtail_counts, evaluate, generate_synthetic,
                   shot_split, subset_longtail, train)

BENCH_PAIRS = ((0, 14), (1, 15), (7, 16), (8, 17), (9, 18), (10, 19))
BENCH_SIGMA = 0.4
BENCH_TAU = 0.1


def make_benchmark(seed: int, gamma: float = 100.0):
    spec = SyntheticSpec(num_classes=20, dim=32, pair_groups=BENCH_PAIRS,
                         intra_noise=BENCH_SIGMA, seed=seed,
                         train_per_class=500, val_per_class=50)
    train_set, val_set, catalog = generate_synthetic(spec)
    counts = build_longtail_counts(LongTailSpec(n_max=500, gamma=gamma, num_classes=20))
    subset, catalog = subset_longtail(train_set, catalog, counts, seed=seed)
    return subset, val_set, catalog, shot_split(catalog.counts)


def bench_config(arm: str, alpha: float, seed: int, loss: str = "ce") -> TrainConfig:
    return TrainConfig(
        stage1=StageConfig(epochs=2, lr0=0.02, lr_min=0.002, alpha=alpha, tau=BENCH_TAU),
        stage2=StageConfig(epochs=8, lr0=0.1, lr_min=0.001, alpha=alpha, tau=BENCH_TAU),
        batch_size=32, loss=loss, arm=arm, seed=seed)


def run_benchmark_arm(arm: str, alpha: float, seeds=range(5)):
    """Median few/many/overall accuracy of one arm across benchmark seeds."""
    few, many, overall = [], [], []
    for seed in seeds:
        subset, val_set, catalog, split = make_benchmark(seed)
        head = train(subset, val_set, catalog, bench_config(arm, alpha, seed))
        report = evaluate(head, val_set, catalog, split)
        few.append(report.few)
        many.append(report.many)
        overall.append(report.overall)
    return {
        "few": float(np.median(few)),
        "many": float(np.median(many)),
        "overall": float(np.median(overall)),
        "few_per_seed": few,
    }
