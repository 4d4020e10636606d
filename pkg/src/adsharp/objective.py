"""The combined training objective: supervised + consistency + distillation.

``total_objective`` evaluates J = J_S + alpha * J_C + beta * J_D on one
labeled and one unlabeled batch and returns batch-averaged loss terms plus
analytic parameter gradients.

Stop-gradient semantics: distillation targets and the consistency anchor are
computed once from the current predictions and then treated as constants.
``total_objective`` can replay a frozen ``ObjectiveTargets`` pack, which is
what the finite-difference gradient audits perturb against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distill import (
    LOG_CLAMP,
    FrozenTargets,
    Strategy,
    StrategyConfig,
    Transform,
    batch_strategy_eval,
    batch_strategy_targets,
)
from .errors import ConfigError
from .net import Gradients, Net, add_grads, zero_like_grads
from .transforms import (
    batch_softmax,
    batch_softmax_grad_to_logits,
    batch_sparsemax,
    batch_sparsemax_grad_to_logits,
    sparsemax,
)

__all__ = [
    "ConsistencyDist",
    "ConsistencySource",
    "ObjectiveConfig",
    "LossBreakdown",
    "ObjectiveTargets",
    "supervised_sparsemax_loss",
    "batch_supervised_loss",
    "consistency_loss",
    "batch_consistency_targets",
    "batch_consistency_eval",
    "vat_perturbation",
    "batch_vat_perturbation",
    "total_objective",
]


class ConsistencyDist(str, Enum):
    KL = "kl"
    L2 = "l2"


class ConsistencySource(str, Enum):
    AUGMENT = "augment"
    VAT = "vat"


@dataclass
class ObjectiveConfig:
    """Weights and distance choices for the combined objective.

    ``distill_augmented`` additionally applies the distillation loss to the
    perturbed predictions (averaging the two contributions) instead of only
    the clean ones.
    """

    alpha: float = 0.0
    beta: float = 1.0
    consistency_dist: ConsistencyDist = ConsistencyDist.KL
    consistency_transform: Transform = Transform.SPARSEMAX
    epsilon_vat: float = 1.0
    distill_augmented: bool = False

    def __post_init__(self) -> None:
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ValueError("alpha must be a finite real >= 0")
        if not (math.isfinite(self.beta) and self.beta >= 0.0):
            raise ValueError("beta must be a finite real >= 0")
        self.consistency_dist = ConsistencyDist(self.consistency_dist)
        self.consistency_transform = Transform(self.consistency_transform)
        if not (math.isfinite(self.epsilon_vat) and self.epsilon_vat > 0.0):
            raise ValueError("epsilon_vat must be a positive finite real")
        self.distill_augmented = bool(self.distill_augmented)


@dataclass(frozen=True)
class LossBreakdown:
    """Batch-averaged objective terms; total = j_s + alpha*j_c + beta*j_d."""

    j_s: float
    j_c: float
    j_d: float
    total: float


@dataclass
class ObjectiveTargets:
    """The stop-gradient data of one objective evaluation."""

    distill: FrozenTargets | None = None
    distill_aug: FrozenTargets | None = None
    anchor_probs: np.ndarray | None = None


# -- supervised term ----------------------------------------------------------


def _check_one_hot(y: np.ndarray) -> None:
    if not (np.all((y == 0.0) | (y == 1.0)) and np.sum(y) == 1.0):
        raise ValueError("y must be a one-hot vector")


def supervised_sparsemax_loss(z: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Sparsemax classification loss: 0.5 * (||y - z||^2 - ||p - z||^2).

    p = sparsemax(z).  The loss is nonnegative, zero exactly when the
    projection already equals the label, and everywhere differentiable with
    gradient p - y.
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != z.shape:
        raise ValueError("y and z must have the same shape")
    _check_one_hot(y)
    p = sparsemax(z).dist.probs
    loss = 0.5 * (float(np.sum((y - z) ** 2)) - float(np.sum((p - z) ** 2)))
    return loss, p - y


def batch_supervised_loss(Z: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized supervised loss: returns per-row losses and grad w.r.t. Z."""
    P = batch_sparsemax(Z)[0]
    losses = 0.5 * (np.sum((Y - Z) ** 2, axis=1) - np.sum((P - Z) ** 2, axis=1))
    return losses, P - Y


def _one_hot_rows(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be a 1-D integer array")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"labels must lie in [0, {k})")
    Y = np.zeros((labels.size, k))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


# -- consistency term ---------------------------------------------------------


def _transform_batch(Z: np.ndarray, transform: Transform) -> np.ndarray:
    if transform == Transform.SPARSEMAX:
        return batch_sparsemax(Z)[0]
    return batch_softmax(Z)


def _chain_batch(grad_P: np.ndarray, P: np.ndarray, transform: Transform) -> np.ndarray:
    if transform == Transform.SPARSEMAX:
        return batch_sparsemax_grad_to_logits(grad_P, P)
    return batch_softmax_grad_to_logits(grad_P, P)


def batch_consistency_targets(Z_anchor: np.ndarray, cfg: ObjectiveConfig) -> np.ndarray:
    """Anchor probabilities (stop-gradient side of the consistency term)."""
    return _transform_batch(np.asarray(Z_anchor, dtype=np.float64), cfg.consistency_transform)


def batch_consistency_eval(
    anchor_probs: np.ndarray, Z_moving: np.ndarray, cfg: ObjectiveConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Distance from frozen anchor probabilities to the moving predictions.

    KL(anchor || moving) clamps the moving side at 1e-8 inside the log; L2 is
    0.5 * ||anchor - moving||^2.  Gradients flow only to ``Z_moving``.
    """
    Pa = np.asarray(anchor_probs, dtype=np.float64)
    Pm = _transform_batch(np.asarray(Z_moving, dtype=np.float64), cfg.consistency_transform)
    if cfg.consistency_dist == ConsistencyDist.KL:
        mask = Pa > 0.0
        Pm_safe = np.maximum(Pm, LOG_CLAMP)
        log_a = np.log(np.where(mask, Pa, 1.0))
        losses = np.sum(np.where(mask, Pa * (log_a - np.log(Pm_safe)), 0.0), axis=1)
        grad_Pm = np.where(mask, -Pa / Pm_safe, 0.0)
    else:
        diff = Pm - Pa
        losses = 0.5 * np.sum(diff * diff, axis=1)
        grad_Pm = diff
    grad_Z = _chain_batch(grad_Pm, Pm, cfg.consistency_transform)
    return losses, grad_Z


def consistency_loss(
    z: np.ndarray, z_prime: np.ndarray, cfg: ObjectiveConfig
) -> tuple[float, np.ndarray]:
    """Per-example consistency distance Dist(anchor(z), probs(z')).

    The anchor is stop-gradient; the returned gradient is w.r.t. z' only.
    """
    z = np.asarray(z, dtype=np.float64)
    z_prime = np.asarray(z_prime, dtype=np.float64)
    if z.shape != z_prime.shape or z.ndim != 1:
        raise ValueError("z and z_prime must be 1-D and the same shape")
    Pa = batch_consistency_targets(z[None, :], cfg)
    losses, grad = batch_consistency_eval(Pa, z_prime[None, :], cfg)
    return float(losses[0]), grad[0]


# -- virtual adversarial perturbation -----------------------------------------

_VAT_XI = 1e-6
_VAT_TINY = 1e-12


def batch_vat_perturbation(
    X: np.ndarray, model: Net, cfg: ObjectiveConfig, rng: np.random.Generator
) -> np.ndarray:
    """Virtual adversarial perturbations, one row per input.

    A random unit probe r is scaled by xi = 1e-6; the gradient of the
    consistency distance w.r.t. the probe input is normalized to length
    ``epsilon_vat``.  Rows whose gradient is numerically zero fall back to
    the random direction itself.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a (B, D) batch")
    R = rng.normal(size=X.shape)
    r_norms = np.linalg.norm(R, axis=1, keepdims=True)
    R = R / np.maximum(r_norms, _VAT_TINY)
    anchor = batch_consistency_targets(model.forward(X, cache=False), cfg)
    Z_probe = model.forward(X + _VAT_XI * R)
    _, grad_Z = batch_consistency_eval(anchor, Z_probe, cfg)
    G = model.backward(grad_Z).inputs
    g_norms = np.linalg.norm(G, axis=1, keepdims=True)
    use_grad = g_norms >= _VAT_TINY
    directions = np.where(use_grad, G / np.maximum(g_norms, _VAT_TINY), R)
    return cfg.epsilon_vat * directions


def vat_perturbation(
    x: np.ndarray, model: Net, cfg: ObjectiveConfig, rng: np.random.Generator
) -> np.ndarray:
    """Single-input wrapper around ``batch_vat_perturbation``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("x must be a 1-D input")
    return batch_vat_perturbation(x[None, :], model, cfg, rng)[0]


# -- the combined objective ----------------------------------------------------


def _unpack_unlabeled(batch_unlabeled) -> tuple[np.ndarray | None, np.ndarray | None]:
    if batch_unlabeled is None:
        return None, None
    if isinstance(batch_unlabeled, tuple):
        X_u, X_up = batch_unlabeled
    else:
        X_u, X_up = batch_unlabeled, None
    X_u = None if X_u is None else np.asarray(X_u, dtype=np.float64)
    X_up = None if X_up is None else np.asarray(X_up, dtype=np.float64)
    if X_u is not None and X_u.ndim != 2:
        raise ValueError("unlabeled batch must be (B, D)")
    if X_up is not None and (X_u is None or X_up.shape != X_u.shape):
        raise ValueError("perturbed unlabeled batch must match the unlabeled batch shape")
    return X_u, X_up


def total_objective(
    batch_labeled: tuple[np.ndarray, np.ndarray],
    batch_unlabeled,
    strategy: StrategyConfig,
    cfg: ObjectiveConfig,
    model: Net,
    *,
    frozen: ObjectiveTargets | None = None,
    return_targets: bool = False,
):
    """Evaluate J = J_S + alpha*J_C + beta*J_D and its parameter gradients.

    ``batch_labeled`` is (X, labels); ``batch_unlabeled`` is X_u or
    (X_u, X_u_perturbed).  The perturbed batch feeds the consistency term
    (required when alpha > 0) and, with ``distill_augmented``, a second
    distillation term.  All three terms are batch means; gradients are exact
    for the stop-gradient semantics (targets and anchors held fixed).

    Passing ``frozen`` replays previously computed targets instead of
    recomputing them, making the evaluation a pure function of the
    parameters; ``return_targets`` returns the pack used.
    """
    X_l, y_l = batch_labeled
    X_l = np.asarray(X_l, dtype=np.float64)
    if X_l.ndim != 2 or X_l.shape[0] == 0:
        raise ConfigError("labeled batch must be a nonempty (B, D) array")
    X_u, X_up = _unpack_unlabeled(batch_unlabeled)
    if cfg.alpha > 0.0 and (X_u is None or X_up is None):
        raise ConfigError("alpha > 0 requires a perturbed unlabeled batch")

    K = model.out_dim
    Y = _one_hot_rows(y_l, K)
    B_l = X_l.shape[0]

    targets = frozen if frozen is not None else ObjectiveTargets()
    grads = zero_like_grads(model)

    Z_l = model.forward(X_l)
    sup_losses, grad_Zl = batch_supervised_loss(Z_l, Y)
    j_s = float(np.mean(sup_losses))
    add_grads(grads, model.backward(grad_Zl / B_l))

    j_c = 0.0
    j_d = 0.0
    B_u = 0 if X_u is None else X_u.shape[0]
    if B_u > 0:
        distill_on = strategy.kind != Strategy.NONE
        distill_parts = 1 + int(cfg.distill_augmented and X_up is not None)

        Z_u = model.forward(X_u)
        if X_up is not None and targets.anchor_probs is None:
            targets.anchor_probs = batch_consistency_targets(Z_u, cfg)
        if distill_on:
            if targets.distill is None:
                targets.distill = batch_strategy_targets(Z_u, strategy)
            d_losses, d_grad = batch_strategy_eval(Z_u, strategy, targets.distill)
            j_d += float(np.sum(d_losses)) / (B_u * distill_parts)
            if cfg.beta > 0.0:
                add_grads(grads, model.backward(cfg.beta * d_grad / (B_u * distill_parts)))

        if X_up is not None:
            Z_up = model.forward(X_up)
            if distill_on and distill_parts == 2:
                if targets.distill_aug is None:
                    targets.distill_aug = batch_strategy_targets(Z_up, strategy)
                d_losses, d_grad = batch_strategy_eval(Z_up, strategy, targets.distill_aug)
                j_d += float(np.sum(d_losses)) / (B_u * distill_parts)
                if cfg.beta > 0.0:
                    add_grads(grads, model.backward(cfg.beta * d_grad / (B_u * distill_parts)))
            c_losses, c_grad = batch_consistency_eval(targets.anchor_probs, Z_up, cfg)
            j_c = float(np.mean(c_losses))
            if cfg.alpha > 0.0:
                add_grads(grads, model.backward(cfg.alpha * c_grad / B_u))

    total = j_s + cfg.alpha * j_c + cfg.beta * j_d
    breakdown = LossBreakdown(j_s=j_s, j_c=j_c, j_d=j_d, total=total)
    if return_targets:
        return breakdown, grads, targets
    return breakdown, grads
