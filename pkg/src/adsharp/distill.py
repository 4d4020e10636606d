"""Distillation strategies for unlabeled predictions.

Five strategies are implemented: entropy minimization (me), temperature
sharpening (sh), pseudo-labeling (pl), negative sampling (ns), and adaptive
sharpening (ads), plus a fixed top-m truncation baseline and a "none"
placeholder.  Each per-example loss returns the loss value, the analytic
gradient w.r.t. the logits, and the (stop-gradient) target it distilled
toward.

The vectorized trainer path is split in two phases: ``batch_strategy_targets``
computes the stop-gradient data (targets, selection masks), and
``batch_strategy_eval`` evaluates loss and gradient for fixed targets.  The
split is what makes finite-difference audits of the analytic gradients
well-posed: the probe re-evaluates phase two only, exactly matching the
stop-gradient semantics of the analytic formulas.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .transforms import (
    ProbDistribution,
    batch_softmax,
    batch_softmax_grad_to_logits,
    batch_sparsemax,
    batch_sparsemax_grad_to_logits,
    softmax,
    softmax_grad_to_logits,
    sparsemax,
    sparsemax_grad_to_logits,
)

__all__ = [
    "Strategy",
    "Transform",
    "MaskReason",
    "PredictionClass",
    "StrategyConfig",
    "DistillTarget",
    "DistillResult",
    "FrozenTargets",
    "me_loss",
    "sh_loss",
    "pl_loss",
    "ns_loss",
    "ads_target",
    "ads_loss",
    "fixed_topm_target",
    "fixed_topm_loss",
    "strategy_loss",
    "batch_strategy_targets",
    "batch_strategy_eval",
    "batch_strategy_loss",
    "classify_prediction",
    "theorem1_predicate",
    "corollary1_bounds",
]

LOG_CLAMP = 1e-8
NS_SATURATION = 1e-12


class Strategy(str, Enum):
    MIN_ENTROPY = "me"
    SHARPEN = "sh"
    PSEUDO_LABEL = "pl"
    NEGATIVE_SAMPLE = "ns"
    ADAPTIVE_SHARPEN = "ads"
    NONE = "none"
    FIXED_TOP_M = "fixed_top_m"


class Transform(str, Enum):
    SOFTMAX = "softmax"
    SPARSEMAX = "sparsemax"


class MaskReason(str, Enum):
    NONE = "none"
    DETERMINATE = "determinate"
    NEGLIGIBLE = "negligible"
    AMBIGUOUS = "ambiguous"
    BELOW_PL_THRESHOLD = "below_pl_threshold"
    NO_NEGATIVES = "no_negatives"


class PredictionClass(str, Enum):
    NEGLIGIBLE = "negligible"
    AMBIGUOUS = "ambiguous"
    INFORMED = "informed"
    DETERMINATE = "determinate"


@dataclass
class StrategyConfig:
    """Strategy selection plus its hyperparameters.

    ``transform`` selects which probability map feeds me/sh/pl/ns and the
    fixed top-m baseline (the ablation axis); adaptive sharpening is defined
    through sparsemax and ignores it.  ``ns_threshold=None`` resolves to 1/K
    at evaluation time.
    """

    kind: Strategy = Strategy.ADAPTIVE_SHARPEN
    transform: Transform = Transform.SOFTMAX
    power: float = 2.0
    temperature: float = 0.5
    pl_threshold: float = 0.95
    ns_threshold: float | None = None
    m_fixed: int = 2

    def __post_init__(self) -> None:
        self.kind = Strategy(self.kind)
        self.transform = Transform(self.transform)
        if not (math.isfinite(self.power) and self.power > 0.0):
            raise ValueError("power must be a finite real > 0")
        if not (math.isfinite(self.temperature) and self.temperature > 0.0):
            raise ValueError("temperature must be a finite real > 0")
        if not (math.isfinite(self.pl_threshold) and 0.0 < self.pl_threshold < 1.0):
            raise ValueError("pl_threshold must lie in (0, 1)")
        if self.ns_threshold is not None and not (
            math.isfinite(self.ns_threshold) and 0.0 < self.ns_threshold < 1.0
        ):
            raise ValueError("ns_threshold must lie in (0, 1) or be None")
        if int(self.m_fixed) != self.m_fixed or self.m_fixed < 1:
            raise ValueError("m_fixed must be an integer >= 1")
        self.m_fixed = int(self.m_fixed)


@dataclass(frozen=True)
class DistillTarget:
    """A distillation target with its selection status."""

    q: ProbDistribution
    selected: bool
    masked_reason: MaskReason = MaskReason.NONE


@dataclass(frozen=True)
class DistillResult:
    """Loss value, gradient w.r.t. logits, and the target that produced them.

    Invariant: ``selected == False`` implies loss == 0 and grad_logits == 0.
    """

    loss: float
    grad_logits: np.ndarray
    target: DistillTarget


def _transform_probs(z: np.ndarray, transform: Transform) -> ProbDistribution:
    if transform == Transform.SPARSEMAX:
        return sparsemax(z).dist
    return softmax(z)


def _chain_to_logits(grad_p: np.ndarray, p: ProbDistribution, transform: Transform) -> np.ndarray:
    if transform == Transform.SPARSEMAX:
        return sparsemax_grad_to_logits(grad_p, p.probs)
    return softmax_grad_to_logits(grad_p, p.probs)


def _masked_result(p: ProbDistribution, q: ProbDistribution, reason: MaskReason) -> DistillResult:
    return DistillResult(
        loss=0.0,
        grad_logits=np.zeros(p.k),
        target=DistillTarget(q=q, selected=False, masked_reason=reason),
    )


def me_loss(p: ProbDistribution, transform: Transform = Transform.SOFTMAX) -> DistillResult:
    """Entropy of the prediction, -sum p_i log p_i, distilled toward itself.

    Expects full-support (softmax) input; sparse input is accepted only when
    explicitly composed with the sparsemax transform (ablation), where
    0 log 0 is taken as 0.
    """
    transform = Transform(transform)
    if transform == Transform.SOFTMAX and p.support.size != p.k:
        raise ValueError("me_loss expects full support; pass transform=sparsemax for sparse input")
    mask = p.probs > 0.0
    logs = np.log(np.where(mask, p.probs, 1.0))
    loss = float(-np.sum(p.probs * logs))
    grad_p = np.where(mask, -(logs + 1.0), 0.0)
    grad_z = _chain_to_logits(grad_p, p, transform)
    return DistillResult(loss, grad_z, DistillTarget(q=p, selected=True))


def sh_loss(p: ProbDistribution, cfg: StrategyConfig) -> DistillResult:
    """Cross-entropy toward the temperature-sharpened (stop-gradient) target.

    Loss is -sum q_i log p_i with q = sharpen(p, temperature); the constant
    q log q term is dropped, and the gradient flows only through p.
    """
    from .transforms import sharpen

    q = sharpen(p, cfg.temperature)
    mask = q.probs > 0.0
    p_safe = np.maximum(p.probs, LOG_CLAMP)
    loss = float(-np.sum(np.where(mask, q.probs * np.log(p_safe), 0.0)))
    grad_p = np.where(mask, -q.probs / p_safe, 0.0)
    grad_z = _chain_to_logits(grad_p, p, cfg.transform)
    return DistillResult(loss, grad_z, DistillTarget(q=q, selected=True))


def pl_loss(p: ProbDistribution, cfg: StrategyConfig) -> DistillResult:
    """Pseudo-labeling: one-hot target at the argmax when confident enough.

    Below ``pl_threshold`` the example is masked with BELOW_PL_THRESHOLD;
    ties pick the lowest index.
    """
    i = int(np.argmax(p.probs))
    one_hot = np.zeros(p.k)
    one_hot[i] = 1.0
    q = ProbDistribution(one_hot)
    if p.probs[i] < cfg.pl_threshold:
        return _masked_result(p, q, MaskReason.BELOW_PL_THRESHOLD)
    p_i = max(float(p.probs[i]), LOG_CLAMP)
    loss = -math.log(p_i)
    grad_p = np.zeros(p.k)
    grad_p[i] = -1.0 / p_i
    grad_z = _chain_to_logits(grad_p, p, cfg.transform)
    return DistillResult(loss, grad_z, DistillTarget(q=q, selected=True))


def ns_loss(p: ProbDistribution, cfg: StrategyConfig) -> DistillResult:
    """Negative sampling: suppress classes whose probability falls below the
    negativity threshold (default 1/K).

    Loss is -log(1 - sum of negative-class probabilities).  With no negative
    classes the example is masked (NO_NEGATIVES); if the negatives absorb
    nearly all mass the log argument is clamped at 1e-12 and a saturation
    warning is emitted.
    """
    thr = cfg.ns_threshold if cfg.ns_threshold is not None else 1.0 / p.k
    neg = p.probs < thr
    if not np.any(neg):
        return _masked_result(p, p, MaskReason.NO_NEGATIVES)
    pos_mass = 1.0 - float(np.sum(np.where(neg, p.probs, 0.0)))
    if pos_mass < NS_SATURATION:
        warnings.warn(
            "negative-class mass saturated the ns loss; clamping log argument",
            RuntimeWarning,
            stacklevel=2,
        )
        pos_safe = NS_SATURATION
        q = p
    else:
        pos_safe = pos_mass
        kept = np.where(neg, 0.0, p.probs)
        q = ProbDistribution(kept / kept.sum())
    loss = -math.log(pos_safe)
    grad_p = np.where(neg, 1.0 / pos_safe, 0.0)
    grad_z = _chain_to_logits(grad_p, p, cfg.transform)
    return DistillResult(loss, grad_z, DistillTarget(q=q, selected=True))


def ads_target(p: ProbDistribution, power: float = 2.0) -> DistillTarget:
    """Power-sharpened target over the sparse support: q_i = p_i^r / sum p_j^r.

    A one-hot prediction is masked as DETERMINATE (nothing left to sharpen);
    the full-uniform prediction is masked as AMBIGUOUS (q would equal p, so
    distillation is a no-op).
    """
    if not (isinstance(power, (int, float)) and math.isfinite(power) and power > 0.0):
        raise ValueError("power must be a finite real > 0")
    if p.is_one_hot():
        return DistillTarget(q=p, selected=False, masked_reason=MaskReason.DETERMINATE)
    if p.is_uniform():
        return DistillTarget(q=p, selected=False, masked_reason=MaskReason.AMBIGUOUS)
    powered = np.power(p.probs, power)
    q = ProbDistribution(powered / powered.sum())
    return DistillTarget(q=q, selected=True)


def _kl_to_frozen_target(
    q: np.ndarray, probs: np.ndarray
) -> tuple[float, np.ndarray]:
    """KL(q || p) over the support of q, with p clamped at 1e-8 inside logs."""
    mask = q > 0.0
    p_safe = np.maximum(probs, LOG_CLAMP)
    log_q = np.log(np.where(mask, q, 1.0))
    loss = float(np.sum(np.where(mask, q * (log_q - np.log(p_safe)), 0.0)))
    grad_p = np.where(mask, -q / p_safe, 0.0)
    return loss, grad_p


def ads_loss(z: np.ndarray, cfg: StrategyConfig) -> DistillResult:
    """Adaptive sharpening: KL(q || sparsemax(z)) with q the power target.

    q is stop-gradient, so the gradient is -sum_i q_i d log p_i / dz chained
    through the sparsemax Jacobian; p inside the log is clamped at 1e-8.
    Masked examples (one-hot or uniform sparsemax) contribute exactly zero.
    """
    p = sparsemax(z).dist
    target = ads_target(p, cfg.power)
    if not target.selected:
        return DistillResult(0.0, np.zeros(p.k), target)
    loss, grad_p = _kl_to_frozen_target(target.q.probs, p.probs)
    grad_z = sparsemax_grad_to_logits(grad_p, p.probs)
    return DistillResult(loss, grad_z, target)


def fixed_topm_target(p: ProbDistribution, m: int, power: float = 2.0) -> DistillTarget:
    """Keep the top-m probabilities (ties to the lowest index), renormalize,
    then apply the same power-r sharpening as the adaptive target."""
    if int(m) != m or not (1 <= m <= p.k):
        raise ValueError(f"m must be an integer in [1, {p.k}]")
    if not (isinstance(power, (int, float)) and math.isfinite(power) and power > 0.0):
        raise ValueError("power must be a finite real > 0")
    order = np.argsort(-p.probs, kind="stable")[: int(m)]
    kept = np.zeros(p.k)
    kept[order] = p.probs[order]
    kept /= kept.sum()
    powered = np.power(kept, power)
    q = ProbDistribution(powered / powered.sum())
    return DistillTarget(q=q, selected=True)


def fixed_topm_loss(z: np.ndarray, cfg: StrategyConfig) -> DistillResult:
    """KL toward the fixed top-m truncated target; never masks (the
    non-adaptive comparison baseline)."""
    p = _transform_probs(z, cfg.transform)
    target = fixed_topm_target(p, cfg.m_fixed, cfg.power)
    loss, grad_p = _kl_to_frozen_target(target.q.probs, p.probs)
    grad_z = _chain_to_logits(grad_p, p, cfg.transform)
    return DistillResult(loss, grad_z, target)


def strategy_loss(z: np.ndarray, cfg: StrategyConfig) -> DistillResult:
    """Dispatch one unlabeled example through the configured strategy."""
    if cfg.kind == Strategy.NONE:
        p = _transform_probs(z, cfg.transform)
        return _masked_result(p, p, MaskReason.NONE)
    if cfg.kind == Strategy.ADAPTIVE_SHARPEN:
        return ads_loss(z, cfg)
    if cfg.kind == Strategy.FIXED_TOP_M:
        return fixed_topm_loss(z, cfg)
    p = _transform_probs(z, cfg.transform)
    if cfg.kind == Strategy.MIN_ENTROPY:
        return me_loss(p, cfg.transform)
    if cfg.kind == Strategy.SHARPEN:
        return sh_loss(p, cfg)
    if cfg.kind == Strategy.PSEUDO_LABEL:
        return pl_loss(p, cfg)
    if cfg.kind == Strategy.NEGATIVE_SAMPLE:
        return ns_loss(p, cfg)
    raise ValueError(f"unknown strategy kind: {cfg.kind}")


def classify_prediction(
    p: ProbDistribution, theta1: float, theta2: float
) -> list[PredictionClass]:
    """Classify each coordinate as negligible, ambiguous, informed, or
    determinate.

    A coordinate exactly equal to 1/K is AMBIGUOUS; otherwise values below
    theta1 are NEGLIGIBLE, above theta2 DETERMINATE, and INFORMED in between
    (inclusive).
    """
    if not (
        math.isfinite(theta1)
        and math.isfinite(theta2)
        and 0.0 < theta1 < theta2 < 1.0
    ):
        raise ValueError("thresholds must satisfy 0 < theta1 < theta2 < 1")
    uniform = 1.0 / p.k
    out = []
    for value in p.probs:
        if value == uniform:
            out.append(PredictionClass.AMBIGUOUS)
        elif value < theta1:
            out.append(PredictionClass.NEGLIGIBLE)
        elif value > theta2:
            out.append(PredictionClass.DETERMINATE)
        else:
            out.append(PredictionClass.INFORMED)
    return out


def theorem1_predicate(p: ProbDistribution) -> bool:
    """True iff the largest probability is at least e times the second largest.

    For softmax predictions this is exactly the condition under which the
    matching sparsemax prediction is one-hot, i.e. adaptive sharpening is
    masked and its loss vanishes (equality included).
    """
    top2 = np.sort(p.probs)[-2:]
    return bool(top2[1] >= math.e * top2[0])


def corollary1_bounds(K: int, rho: int) -> tuple[float, float, float, float]:
    """Interval bounds for the sample-dependent masking thresholds.

    Returns (theta1_lo, theta1_hi, theta2_lo, theta2_hi) for K classes and
    support size rho:

        theta1 in [e/(e+K-1), e/(e+1)]
        theta2 in [e^rho/(rho+e^rho(K-rho)), e^rho/(rho+e^rho)]
    """
    if int(K) != K or K < 2:
        raise ValueError("K must be an integer >= 2")
    if int(rho) != rho or not (1 <= rho < K):
        raise ValueError("rho must be an integer in [1, K)")
    e = math.e
    theta1_lo = e / (e + (K - 1.0))
    theta1_hi = e / (e + 1.0)
    er = math.exp(float(rho))
    theta2_lo = er / (rho + er * (K - rho))
    theta2_hi = er / (rho + er)
    return theta1_lo, theta1_hi, theta2_lo, theta2_hi


# ---------------------------------------------------------------------------
# Vectorized trainer path.  Phase one (targets) computes all stop-gradient
# data; phase two (eval) is a pure function of the logits given those targets.
# Equivalence with the per-example ops is pinned by tests.
# ---------------------------------------------------------------------------


@dataclass
class FrozenTargets:
    """Stop-gradient data for one batch: targets and selection masks."""

    kind: Strategy
    selected: np.ndarray  # (B,) bool
    q: np.ndarray | None = None  # (B, K) target distributions
    pl_idx: np.ndarray | None = None  # (B,) argmax indices for pseudo-labels
    ns_neg: np.ndarray | None = None  # (B, K) bool negative-class sets


def _batch_transform(Z: np.ndarray, transform: Transform) -> np.ndarray:
    if transform == Transform.SPARSEMAX:
        return batch_sparsemax(Z)[0]
    return batch_softmax(Z)


def _batch_chain(grad_P: np.ndarray, P: np.ndarray, transform: Transform) -> np.ndarray:
    if transform == Transform.SPARSEMAX:
        return batch_sparsemax_grad_to_logits(grad_P, P)
    return batch_softmax_grad_to_logits(grad_P, P)


def batch_strategy_targets(Z: np.ndarray, cfg: StrategyConfig) -> FrozenTargets:
    """Compute the stop-gradient targets for a (B, K) batch of logits."""
    Z = np.asarray(Z, dtype=np.float64)
    B, K = Z.shape
    kind = cfg.kind

    if kind == Strategy.NONE:
        return FrozenTargets(kind, selected=np.zeros(B, dtype=bool))

    if kind == Strategy.ADAPTIVE_SHARPEN:
        P, _, k_support = batch_sparsemax(Z)
        one_hot = k_support == 1
        uniform = np.all(P == P[:, :1], axis=1)
        selected = ~(one_hot | uniform)
        powered = np.power(P, cfg.power)
        Q = powered / powered.sum(axis=1, keepdims=True)
        return FrozenTargets(kind, selected, q=Q)

    P = _batch_transform(Z, cfg.transform)

    if kind == Strategy.FIXED_TOP_M:
        order = np.argsort(-P, axis=1, kind="stable")[:, : cfg.m_fixed]
        kept = np.zeros_like(P)
        rows = np.arange(B)[:, None]
        kept[rows, order] = P[rows, order]
        kept /= kept.sum(axis=1, keepdims=True)
        powered = np.power(kept, cfg.power)
        Q = powered / powered.sum(axis=1, keepdims=True)
        return FrozenTargets(kind, selected=np.ones(B, dtype=bool), q=Q)

    if kind == Strategy.MIN_ENTROPY:
        # self-distillation: no stop-gradient data
        return FrozenTargets(kind, selected=np.ones(B, dtype=bool))

    if kind == Strategy.SHARPEN:
        powered = np.power(P, 1.0 / cfg.temperature)
        Q = powered / powered.sum(axis=1, keepdims=True)
        return FrozenTargets(kind, selected=np.ones(B, dtype=bool), q=Q)

    if kind == Strategy.PSEUDO_LABEL:
        idx = np.argmax(P, axis=1)
        p_max = P[np.arange(B), idx]
        selected = p_max >= cfg.pl_threshold
        return FrozenTargets(kind, selected, pl_idx=idx)

    if kind == Strategy.NEGATIVE_SAMPLE:
        thr = cfg.ns_threshold if cfg.ns_threshold is not None else 1.0 / K
        neg = P < thr
        selected = np.any(neg, axis=1)
        return FrozenTargets(kind, selected, ns_neg=neg)

    raise ValueError(f"unknown strategy kind: {kind}")


def batch_strategy_eval(
    Z: np.ndarray, cfg: StrategyConfig, tgt: FrozenTargets
) -> tuple[np.ndarray, np.ndarray]:
    """Loss and logits gradient for a batch given frozen targets.

    Pure in Z: probing Z while holding ``tgt`` fixed realizes the
    stop-gradient semantics, so central differences of this function match
    the analytic gradients.
    """
    Z = np.asarray(Z, dtype=np.float64)
    B, K = Z.shape
    kind = tgt.kind
    selected = tgt.selected

    if kind == Strategy.NONE:
        return np.zeros(B), np.zeros((B, K))

    if kind == Strategy.ADAPTIVE_SHARPEN:
        P = batch_sparsemax(Z)[0]
        transform = Transform.SPARSEMAX
    else:
        P = _batch_transform(Z, cfg.transform)
        transform = cfg.transform

    if kind == Strategy.MIN_ENTROPY:
        mask = P > 0.0
        logs = np.log(np.where(mask, P, 1.0))
        losses = -np.sum(P * logs, axis=1)
        grad_P = np.where(mask, -(logs + 1.0), 0.0)
    elif kind == Strategy.SHARPEN:
        mask = tgt.q > 0.0
        P_safe = np.maximum(P, LOG_CLAMP)
        losses = -np.sum(np.where(mask, tgt.q * np.log(P_safe), 0.0), axis=1)
        grad_P = np.where(mask, -tgt.q / P_safe, 0.0)
    elif kind == Strategy.PSEUDO_LABEL:
        rows = np.arange(B)
        p_at = np.maximum(P[rows, tgt.pl_idx], LOG_CLAMP)
        losses = -np.log(p_at)
        grad_P = np.zeros_like(P)
        grad_P[rows, tgt.pl_idx] = -1.0 / p_at
    elif kind == Strategy.NEGATIVE_SAMPLE:
        pos_mass = 1.0 - np.sum(np.where(tgt.ns_neg, P, 0.0), axis=1)
        if np.any(selected & (pos_mass < NS_SATURATION)):
            warnings.warn(
                "negative-class mass saturated the ns loss; clamping log argument",
                RuntimeWarning,
                stacklevel=2,
            )
        pos_safe = np.maximum(pos_mass, NS_SATURATION)
        losses = -np.log(pos_safe)
        grad_P = np.where(tgt.ns_neg, 1.0 / pos_safe[:, None], 0.0)
    elif kind in (Strategy.ADAPTIVE_SHARPEN, Strategy.FIXED_TOP_M):
        mask = tgt.q > 0.0
        P_safe = np.maximum(P, LOG_CLAMP)
        log_q = np.log(np.where(mask, tgt.q, 1.0))
        losses = np.sum(np.where(mask, tgt.q * (log_q - np.log(P_safe)), 0.0), axis=1)
        grad_P = np.where(mask, -tgt.q / P_safe, 0.0)
    else:
        raise ValueError(f"unknown strategy kind: {kind}")

    grad_Z = _batch_chain(grad_P, P, transform)
    losses = np.where(selected, losses, 0.0)
    grad_Z[~selected] = 0.0
    return losses, grad_Z


def batch_strategy_loss(
    Z: np.ndarray, cfg: StrategyConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized strategy loss over a batch of logits.

    Returns (losses, grad_logits, selected) with shapes (B,), (B, K), (B,).
    Masked rows have exactly zero loss and gradient.
    """
    tgt = batch_strategy_targets(Z, cfg)
    losses, grad_Z = batch_strategy_eval(Z, cfg, tgt)
    return losses, grad_Z, tgt.selected
