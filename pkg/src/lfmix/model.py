"""Cosine-similarity classification head with a trainable adapter.

The head keeps two square maps over the frozen base embeddings: an encoder
stand-in ``encoder_proj`` (trained in stage 1) and the adapter ``W`` (trained
in stage 2), both initialized to identity. Prediction normalizes the mapped
feature and scores it against the frozen text features by scaled cosine
similarity.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ClassCatalog, DataError


@dataclass
class TrainedHead:
    """Adapter + encoder stand-in + training history.

    Raw cosine logits live in [-1, 1], which starves cross-entropy of
    gradient signal, so logits are scaled by ``logit_scale`` (default 30).
    The argmax prediction is invariant to the scale.
    """

    dim: int
    W: np.ndarray = None
    encoder_proj: np.ndarray = None
    logit_scale: float = 30.0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.W is None:
            self.W = np.eye(self.dim)
        if self.encoder_proj is None:
            self.encoder_proj = np.eye(self.dim)
        self.W = np.asarray(self.W, dtype=np.float64)
        self.encoder_proj = np.asarray(self.encoder_proj, dtype=np.float64)
        for name, m in (("W", self.W), ("encoder_proj", self.encoder_proj)):
            if m.shape != (self.dim, self.dim):
                raise DataError(f"{name} must be {self.dim}x{self.dim}")
            if not np.all(np.isfinite(m)):
                raise DataError(f"{name} contains non-finite entries")
        if self.logit_scale <= 0:
            raise DataError("logit_scale must be > 0")

    def is_zero_shot(self) -> bool:
        eye = np.eye(self.dim)
        return np.array_equal(self.W, eye) and np.array_equal(self.encoder_proj, eye)


def map_features(head: TrainedHead, base: np.ndarray) -> np.ndarray:
    """normalize(W @ (encoder_proj @ base)) for a single row or a batch.

    Zero or non-finite inputs (or inputs the maps send to zero) are an
    error: the normalized feature would be undefined.
    """
    base = np.asarray(base, dtype=np.float64)
    if not np.all(np.isfinite(base)):
        raise DataError("base feature contains non-finite values")
    single = base.ndim == 1
    rows = np.atleast_2d(base)
    if rows.shape[1] != head.dim:
        raise DataError(f"base feature dim {rows.shape[1]} != head dim {head.dim}")
    mapped = (rows @ head.encoder_proj.T) @ head.W.T
    norms = np.linalg.norm(mapped, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("mapped feature has zero norm; normalization undefined")
    out = mapped / norms
    return out[0] if single else out


def forward(head: TrainedHead, base_feature: np.ndarray) -> np.ndarray:
    """Unit-norm image feature for one base embedding."""
    return map_features(head, np.asarray(base_feature))


def cosine_logits(f_img: np.ndarray, catalog: ClassCatalog, logit_scale: float = 1.0) -> np.ndarray:
    """logits[k] = scale * <f_img, text_feature_k>; rows may be batched."""
    f_img = np.asarray(f_img, dtype=np.float64)
    return logit_scale * (f_img @ catalog.text_features.T)


def predict(head: TrainedHead, base_feature: np.ndarray, catalog: ClassCatalog):
    """Argmax class from scaled cosine logits; ties break to the lowest index."""
    logits = cosine_logits(map_features(head, base_feature), catalog, head.logit_scale)
    pred = np.argmax(logits, axis=-1)
    return int(pred) if np.ndim(pred) == 0 else pred


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def soft_ce_loss(logits: np.ndarray, soft_label: np.ndarray):
    """Cross entropy against a soft target.

    Returns (loss, gradient wrt logits); the gradient is softmax - target.
    Batched rows return per-row losses and gradients.
    """
    logp = log_softmax(logits)
    soft_label = np.asarray(soft_label, dtype=np.float64)
    loss = -(soft_label * logp).sum(axis=-1)
    grad = np.exp(logp) - soft_label
    return loss, grad


def balanced_ce_adjust(logits: np.ndarray, counts) -> np.ndarray:
    """Prior-adjusted logits for balanced cross entropy: logits + ln(n_k / N).

    Training-time only; inference keeps raw logits. Balanced counts reduce
    to a constant shift, so the softmax is unchanged there.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise DataError("class counts must be >= 1")
    return np.asarray(logits, dtype=np.float64) + np.log(counts / counts.sum())


@dataclass(frozen=True)
class Schedule:
    """Cosine-annealed learning rate from lr0 down to lr_min over total_steps."""

    lr0: float
    lr_min: float
    total_steps: int

    def __post_init__(self):
        if self.lr_min > self.lr0:
            raise DataError("lr_min must not exceed lr0")
        if self.total_steps < 1:
            raise DataError("total_steps must be >= 1")


def cosine_anneal(schedule: Schedule, step: int) -> float:
    if not 0 <= step <= schedule.total_steps:
        raise DataError(f"step {step} outside [0, {schedule.total_steps}]")
    span = schedule.lr0 - schedule.lr_min
    return schedule.lr_min + 0.5 * span * (1.0 + np.cos(np.pi * step / schedule.total_steps))


def batch_loss_and_grads(head: TrainedHead, catalog: ClassCatalog, feats: np.ndarray,
                         soft_labels: np.ndarray, loss_counts=None):
    """Mean soft-CE over a batch plus analytic gradients wrt W and encoder_proj.

    The gradient through L2 normalization uses the tangent projection
    (I - f f^T) / ||v|| applied to the upstream gradient; the finite-difference
    suite in the verification module is the contract for this math. When
    ``loss_counts`` is given the logits are prior-adjusted (balanced CE)
    before the softmax.
    """
    X = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(soft_labels, dtype=np.float64))
    B = X.shape[0]
    T = catalog.text_features
    s = head.logit_scale

    Z1 = X @ head.encoder_proj.T
    Z2 = Z1 @ head.W.T
    norms = np.linalg.norm(Z2, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("mapped feature has zero norm; normalization undefined")
    F = Z2 / norms
    U = s * (F @ T.T)
    if loss_counts is not None:
        U = balanced_ce_adjust(U, loss_counts)
    losses, dU = soft_ce_loss(U, Y)
    loss = float(losses.mean())

    dU /= B
    G_F = s * (dU @ T)
    G_Z2 = (G_F - (G_F * F).sum(axis=1, keepdims=True) * F) / norms
    grad_W = G_Z2.T @ Z1
    G_Z1 = G_Z2 @ head.W
    grad_proj = G_Z1.T @ X
    return loss, grad_W, grad_proj


def head_to_dict(head: TrainedHead, config: dict | None = None) -> dict:
    return {
        "dim": head.dim,
        "logit_scale": head.logit_scale,
        "W": head.W.tolist(),
        "encoder_proj": head.encoder_proj.tolist(),
        "config": config or {},
        "history": head.history,
    }


def save_head(path, head: TrainedHead, config: dict | None = None) -> None:
    Path(path).write_text(json.dumps(head_to_dict(head, config), sort_keys=True) + "\n")


def load_head(path) -> TrainedHead:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    missing = {"dim", "logit_scale", "W", "encoder_proj"} - set(doc)
    if missing:
        raise DataError(f"{path}: head file missing keys {sorted(missing)}")
    return TrainedHead(
        dim=int(doc["dim"]),
        W=np.asarray(doc["W"], dtype=np.float64),
        encoder_proj=np.asarray(doc["encoder_proj"], dtype=np.float64),
        logit_scale=float(doc["logit_scale"]),
        history=list(doc.get("history", [])),
    )
