"""Self-contained verification suites: closed forms vs independent oracles.

Four checks, all deterministic under their seeds:

* label-shift closed form vs numeric constrained argmin of the
  balance-regularized objective (golden-section search);
* the Beta(1/2, 1/2) blend-weight sampler vs the arcsine CDF (KS);
* analytic gradients through adapter -> normalize -> cosine -> soft-CE
  vs central finite differences;
* pair-sampler Monte-Carlo frequencies vs the analytic conditional matrix
  and the pair-observation distribution (3-sigma and chi-square).
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data import ClassCatalog, LongTailSpec, SyntheticSpec, build_longtail_counts, \
    generate_synthetic, normalize_rows, subset_longtail
from .mixing import argmin_label_weight, label_shift
from .model import TrainedHead, batch_loss_and_grads
from .sampling import PairStream, build_sampling_model, effective_class_distribution
from .seeds import derive_rng


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def arcsine_cdf(x):
    return 2.0 / np.pi * np.arcsin(np.sqrt(np.clip(x, 0.0, 1.0)))


def check_shift_argmin_equivalence(n: int = 10_000, seed: int = 0,
                              tol: float = 1e-6) -> CheckResult:
    """Closed-form label shift vs golden-section argmin on random triples."""
    rng = derive_rng(seed, "verify", "shift_argmin")
    lam_x = rng.random(n)
    alpha = 2.0 * rng.random(n)
    n_i = rng.integers(1, 10_001, size=n)
    n_j = rng.integers(1, 10_001, size=n)
    started = time.perf_counter()
    closed = label_shift(lam_x, alpha, n_i, n_j)
    numeric = argmin_label_weight(lam_x, alpha, n_i / (n_i + n_j))
    elapsed = time.perf_counter() - started
    worst = float(np.abs(closed - numeric).max())
    return CheckResult(
        name="shift_argmin_equivalence",
        passed=worst <= tol,
        detail=f"max |closed - argmin| = {worst:.2e} over {n} triples "
               f"(tol {tol:.0e}, {elapsed:.2f}s)",
    )


def check_mix_weight_distribution(n: int = 100_000, seed: int = 0,
                                  threshold: float = 0.01) -> CheckResult:
    """KS statistic of the arcsine blend-weight sampler vs its exact CDF."""
    rng = derive_rng(seed, "verify", "mixweight")
    samples = np.sin(np.pi * rng.random(n) / 2.0) ** 2
    ks = stats.kstest(samples, arcsine_cdf)
    return CheckResult(
        name="mix_weight_arcsine_ks",
        passed=ks.statistic < threshold,
        detail=f"KS = {ks.statistic:.4f} at n={n} (threshold {threshold})",
    )


def _random_head_setup(rng, num_classes: int = 6, dim: int = 8, batch: int = 4):
    catalog = ClassCatalog(
        names=tuple(f"c{k}" for k in range(num_classes)),
        counts=rng.integers(1, 500, size=num_classes),
        text_features=normalize_rows(rng.standard_normal((num_classes, dim))),
    )
    head = TrainedHead(
        dim=dim,
        W=np.eye(dim) + 0.2 * rng.standard_normal((dim, dim)),
        encoder_proj=np.eye(dim) + 0.2 * rng.standard_normal((dim, dim)),
        logit_scale=30.0,
    )
    feats = normalize_rows(rng.standard_normal((batch, dim)))
    raw = rng.random((batch, num_classes))
    labels = raw / raw.sum(axis=1, keepdims=True)
    return head, catalog, feats, labels


def check_gradients(points: int = 100, seed: int = 0, tol: float = 1e-4,
                    balanced: bool = False) -> CheckResult:
    """Analytic loss gradients vs central finite differences.

    ``points`` random coordinates are probed, split between the adapter and
    the encoder stand-in, across several random configurations.
    """
    rng = derive_rng(seed, "verify", "gradcheck")
    worst = 0.0
    checked = 0
    while checked < points:
        head, catalog, feats, labels = _random_head_setup(rng)
        loss_counts = catalog.counts if balanced else None
        _, grad_w, grad_proj = batch_loss_and_grads(head, catalog, feats, labels, loss_counts)
        for _ in range(min(20, points - checked)):
            target = head.W if rng.random() < 0.5 else head.encoder_proj
            analytic = grad_w if target is head.W else grad_proj
            r, c = rng.integers(head.dim, size=2)
            h = 1e-6 * max(1.0, abs(target[r, c]))
            orig = target[r, c]
            target[r, c] = orig + h
            up, _, _ = batch_loss_and_grads(head, catalog, feats, labels, loss_counts)
            target[r, c] = orig - h
            down, _, _ = batch_loss_and_grads(head, catalog, feats, labels, loss_counts)
            target[r, c] = orig
            numeric = (up - down) / (2.0 * h)
            scale = max(abs(numeric), abs(analytic[r, c]), 1e-8)
            worst = max(worst, abs(numeric - analytic[r, c]) / scale)
            checked += 1
    return CheckResult(
        name="gradient_finite_differences" + ("_balanced" if balanced else ""),
        passed=worst < tol,
        detail=f"max relative error = {worst:.2e} over {checked} coordinates (tol {tol})",
    )


def sampler_test_model(seed: int = 0, tau: float = 0.75):
    """C=10 long-tailed synthetic model used by the Monte-Carlo fidelity check."""
    spec = SyntheticSpec(num_classes=10, dim=16, pair_groups=((0, 5), (1, 6)),
                         intra_noise=0.25, seed=seed, train_per_class=200,
                         val_per_class=20)
    train, _, catalog = generate_synthetic(spec)
    counts = build_longtail_counts(LongTailSpec(n_max=200, gamma=100.0, num_classes=10))
    subset, catalog = subset_longtail(train, catalog, counts, seed=seed)
    return build_sampling_model(catalog, tau), subset, catalog


def check_sampler_fidelity(draws: int = 1_000_000, seed: int = 0,
                           p_floor: float = 0.001) -> CheckResult:
    """Empirical pair frequencies vs the analytic model.

    Conditional second-class frequencies must sit within 3 binomial sigma of
    each p_cond entry, pair-membership frequencies within 3 sigma of the
    pair-observation distribution, and the global conditional chi-square
    p-value must clear ``p_floor``.
    """
    model, data, _ = sampler_test_model(seed=seed)
    C = model.num_classes
    stream = PairStream(model, data, derive_rng(seed, "verify", "sampler"))
    table = np.zeros((C, C), dtype=np.int64)
    member = np.zeros(C, dtype=np.int64)
    remaining = draws
    while remaining:
        n = min(remaining, 200_000)
        _, y_i, _, y_j = stream.draw_batch(n)
        np.add.at(table, (y_i, y_j), 1)
        member += np.bincount(y_i, minlength=C) + np.bincount(y_j, minlength=C)
        remaining -= n
    m = table.sum(axis=1)

    off = ~np.eye(C, dtype=bool)
    freq = table / m[:, None]
    sigma = np.sqrt(model.p_cond * (1.0 - model.p_cond) / m[:, None])
    cond_z = np.abs(freq - model.p_cond)[off] / sigma[off]
    worst_cond = float(cond_z.max())

    p_y = effective_class_distribution(model)
    memb_sigma = np.sqrt(p_y * (1.0 - p_y) / draws)
    memb_z = np.abs(member / draws - p_y) / memb_sigma
    worst_memb = float(memb_z.max())

    expected = m[:, None] * model.p_cond
    chi2_stat = float(((table - expected)[off] ** 2 / expected[off]).sum())
    dof = C * (C - 2)
    p_value = float(stats.chi2.sf(chi2_stat, dof))

    passed = worst_cond <= 3.0 and worst_memb <= 3.0 and p_value > p_floor
    return CheckResult(
        name="sampler_monte_carlo_fidelity",
        passed=passed,
        detail=f"max conditional z = {worst_cond:.2f}, max membership z = "
               f"{worst_memb:.2f}, chi2 p = {p_value:.4f} over {draws} draws",
    )


def run_all(seed: int = 0, sampler_draws: int = 1_000_000) -> list:
    return [
        check_shift_argmin_equivalence(seed=seed),
        check_mix_weight_distribution(seed=seed),
        check_gradients(seed=seed),
        check_sampler_fidelity(draws=sampler_draws, seed=seed),
    ]
