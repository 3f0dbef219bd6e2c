"""Label-shift mixup and the baseline label rules it is compared against.

The blend weight lambda_x follows Beta(1/2, 1/2); the label weight lambda_y
is shifted towards the rarer class by alpha * (n_i - n_j) / (n_i + n_j) and
clamped to [0, 1]. ``argmin_label_weight`` re-derives the same weight by
numerically minimizing the balance-regularized objective and exists purely
as an independent cross-check of the closed form.

Blended features are deliberately NOT re-normalized: the training pipeline
normalizes after the adapter, not after the blend, which changes the logits
a normalized blend would produce.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import DataError


@dataclass(frozen=True)
class ShiftParams:
    """Label-shift intensity alpha >= 0 plus the Beta parameters for lambda_x."""

    alpha: float = 1.0
    beta_a: float = 0.5
    beta_b: float = 0.5

    def __post_init__(self):
        if self.alpha < 0:
            raise DataError("label-shift intensity alpha must be >= 0")
        if self.beta_a <= 0 or self.beta_b <= 0:
            raise DataError("Beta parameters must be positive")


@dataclass(frozen=True)
class MixedExample:
    feature: np.ndarray
    soft_label: np.ndarray
    lambda_x: float
    lambda_y: float
    source: tuple  # (class of x_i, class of x_j)


def label_shift(lambda_x, alpha, n_i, n_j):
    """lambda_y = clamp(lambda_x - alpha * (n_i - n_j) / (n_i + n_j), 0, 1).

    Accepts scalars or broadcastable arrays. When n_i > n_j the label weight
    moves off the frequent class and towards the rare one; equal counts or
    alpha = 0 leave lambda_x untouched.
    """
    lambda_x = np.asarray(lambda_x, dtype=np.float64)
    n_i = np.asarray(n_i, dtype=np.float64)
    n_j = np.asarray(n_j, dtype=np.float64)
    if np.any(lambda_x < 0) or np.any(lambda_x > 1):
        raise DataError("lambda_x must lie in [0, 1]")
    if np.any(n_i < 1) or np.any(n_j < 1):
        raise DataError("class counts must be >= 1")
    if np.any(np.asarray(alpha) < 0):
        raise DataError("alpha must be >= 0")
    shifted = lambda_x - alpha * (n_i - n_j) / (n_i + n_j)
    out = np.clip(shifted, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def argmin_label_weight(lambda_x, alpha, p, tol: float = 1e-8):
    """Constrained minimizer of (l - lambda_x)^2 / 2 + alpha * R(l) over [0, 1],
    with R(l) = (l - 1/2)^2 - (l - p)^2 and p the frequency share n_i/(n_i+n_j).

    Solved by golden-section search (the objective is convex: its second
    derivative is identically 1), evaluating the objective verbatim so this
    stays an oracle independent of the closed-form shift. Vectorized over
    broadcastable inputs; the returned bracket midpoint is within tol of the
    true minimizer.
    """
    lambda_x, alpha, p = np.broadcast_arrays(
        np.asarray(lambda_x, dtype=np.float64),
        np.asarray(alpha, dtype=np.float64),
        np.asarray(p, dtype=np.float64),
    )
    if np.any((p <= 0) | (p >= 1)):
        raise DataError("frequency share p must lie in (0, 1)")

    def objective(l):
        return 0.5 * (l - lambda_x) ** 2 + alpha * ((l - 0.5) ** 2 - (l - p) ** 2)

    lo = np.zeros(lambda_x.shape)
    hi = np.ones(lambda_x.shape)
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    # interval shrinks by invphi per step; ~40 steps take 1 down to < 1e-8
    steps = max(1, math.ceil(math.log(tol) / math.log(_INVPHI)))
    for _ in range(steps):
        shrink_right = f1 < f2
        hi = np.where(shrink_right, x2, hi)
        lo = np.where(shrink_right, lo, x1)
        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1, f2 = objective(x1), objective(x2)
    out = 0.5 * (lo + hi)
    return float(out) if out.ndim == 0 else out


def sample_mix_weight(rng: np.random.Generator, beta_a: float = 0.5, beta_b: float = 0.5):
    """Draw lambda_x ~ Beta(a, b).

    The default Beta(1/2, 1/2) (arcsine law) uses the exact inverse-CDF
    transform sin^2(pi * U / 2), which reproduces bit-for-bit from a shared
    uniform stream; other parameters fall back to the generator's sampler.
    """
    if beta_a == 0.5 and beta_b == 0.5:
        u = rng.random()
        return math.sin(math.pi * u / 2.0) ** 2
    return float(rng.beta(beta_a, beta_b))


def soft_pair_label(num_classes: int, y_i: int, y_j: int, lambda_y: float) -> np.ndarray:
    label = np.zeros(num_classes)
    label[y_i] += lambda_y
    label[y_j] += 1.0 - lambda_y
    return label


def mix(pair, counts, shift: ShiftParams, rng: np.random.Generator) -> MixedExample:
    """Blend one sampled pair into a training example.

    ``pair`` is ((x_i, y_i), (x_j, y_j)); ``counts`` are the per-class
    training counts used by the label shift. The feature is the raw convex
    blend lambda_x * x_i + (1 - lambda_x) * x_j.
    """
    (x_i, y_i), (x_j, y_j) = pair
    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise DataError(f"feature dims differ: {x_i.shape} vs {x_j.shape}")
    lam_x = sample_mix_weight(rng, shift.beta_a, shift.beta_b)
    lam_y = label_shift(lam_x, shift.alpha, counts[y_i], counts[y_j])
    return MixedExample(
        feature=lam_x * x_i + (1.0 - lam_x) * x_j,
        soft_label=soft_pair_label(len(counts), y_i, y_j, lam_y),
        lambda_x=lam_x,
        lambda_y=lam_y,
        source=(int(y_i), int(y_j)),
    )


def mixup_label_weight(lambda_x):
    """Standard mixup: the label weight equals the blend weight."""
    out = np.asarray(lambda_x, dtype=np.float64)
    return float(out) if out.ndim == 0 else out.copy()


def remix_label_weight(lambda_x, n_i, n_j, kappa: float = 3.0, tau: float = 0.5):
    """Count-threshold label assignment of the Remix baseline.

    The full label goes to the rarer class when the count ratio is at least
    kappa and the blend weight leaves it underrepresented (below tau);
    otherwise the standard mixup weight is kept. Defaults kappa=3, tau=0.5.
    """
    lambda_x = np.asarray(lambda_x, dtype=np.float64)
    n_i = np.asarray(n_i, dtype=np.float64)
    n_j = np.asarray(n_j, dtype=np.float64)
    out = lambda_x.copy()
    out = np.where((n_i / n_j >= kappa) & (lambda_x < tau), 0.0, out)
    out = np.where((n_i / n_j <= 1.0 / kappa) & (1.0 - lambda_x < tau), 1.0, out)
    return float(out) if out.ndim == 0 else out
