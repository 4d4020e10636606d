"""Probability transforms over logits: softmax, sparsemax, and sharpening.

Per-example ops work on a single logits vector and return validated
distribution objects.  The ``batch_*`` variants are the vectorized kernels
used by the trainer; they operate on ``(B, K)`` arrays and are pinned to the
per-example ops by equivalence tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProbDistribution",
    "SparsemaxSolution",
    "softmax",
    "sparsemax",
    "sparsemax_jacobian",
    "sharpen",
    "binary_sparsemax_of_softmax",
    "batch_softmax",
    "batch_sparsemax",
    "softmax_grad_to_logits",
    "sparsemax_grad_to_logits",
    "batch_softmax_grad_to_logits",
    "batch_sparsemax_grad_to_logits",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ProbDistribution:
    """A point on the probability simplex.

    Invariants checked at construction: entries are finite and nonnegative,
    they sum to 1 within 1e-12, and the support is nonempty.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 2:
            raise ValueError("probs must be a 1-D vector with K >= 2 entries")
        if not np.all(np.isfinite(probs)):
            raise ValueError("probs must be finite")
        if np.any(probs < 0.0):
            raise ValueError("probs must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > _SUM_TOL:
            raise ValueError(f"probs must sum to 1 within {_SUM_TOL}, got {probs.sum()!r}")
        if not np.any(probs > 0.0):
            raise ValueError("support must be nonempty")
        object.__setattr__(self, "probs", probs)

    @property
    def k(self) -> int:
        """Number of classes."""
        return int(self.probs.size)

    @property
    def support(self) -> np.ndarray:
        """Indices of strictly positive coordinates."""
        return np.flatnonzero(self.probs > 0.0)

    def is_one_hot(self) -> bool:
        return self.support.size == 1

    def is_uniform(self) -> bool:
        """True iff every coordinate equals 1/K exactly as computed floats."""
        return bool(np.all(self.probs == self.probs[0]))


@dataclass(frozen=True)
class SparsemaxSolution:
    """Sparsemax output together with its threshold and support size."""

    dist: ProbDistribution
    tau: float
    k_support: int

    def __post_init__(self) -> None:
        if self.k_support != int(self.dist.support.size):
            raise ValueError("k_support must equal |support|")


def _validate_logits(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("logits must be a 1-D vector with K >= 2 entries")
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    return z


def _validate_batch_logits(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[1] < 2:
        raise ValueError("batch logits must have shape (B, K) with K >= 2")
    if not np.all(np.isfinite(Z)):
        raise ValueError("batch logits must be finite")
    return Z


def batch_softmax(Z: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (B, K) logits array, stabilized by max subtraction."""
    Z = _validate_batch_logits(Z)
    shifted = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def batch_sparsemax(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise sparsemax (Euclidean projection onto the simplex).

    Args:
        Z: logits of shape (B, K).

    Returns:
        (P, tau, k_support) where P has shape (B, K), tau shape (B,) holds the
        per-row thresholds, and k_support shape (B,) the support sizes.
    """
    Z = _validate_batch_logits(Z)
    K = Z.shape[1]
    z_sorted = -np.sort(-Z, axis=1)
    csum = np.cumsum(z_sorted, axis=1)
    ks = np.arange(1, K + 1, dtype=np.float64)
    # largest k with 1 + k * z_(k) > sum_{j<=k} z_(j); the condition holds for
    # a prefix of k values, so the count equals the maximum.
    feasible = 1.0 + ks * z_sorted > csum
    k = np.count_nonzero(feasible, axis=1)
    rows = np.arange(Z.shape[0])
    tau = (csum[rows, k - 1] - 1.0) / k
    P = np.maximum(Z - tau[:, None], 0.0)
    k_support = np.count_nonzero(P > 0.0, axis=1)
    return P, tau, k_support


def softmax(z: np.ndarray) -> ProbDistribution:
    """Softmax of a logits vector.

    Output has full support and sums to 1 up to float rounding.
    """
    z = _validate_logits(z)
    P = batch_softmax(z[None, :])
    return ProbDistribution(P[0])


def sparsemax(z: np.ndarray) -> SparsemaxSolution:
    """Sparsemax of a logits vector: p_i = max(z_i - tau, 0).

    The threshold tau is the water-filling level over the support, so the
    nonzero coordinates are exactly z_i - tau and sum to 1.
    """
    z = _validate_logits(z)
    P, tau, k_support = batch_sparsemax(z[None, :])
    return SparsemaxSolution(
        dist=ProbDistribution(P[0]), tau=float(tau[0]), k_support=int(k_support[0])
    )


def sparsemax_jacobian(sol: SparsemaxSolution) -> np.ndarray:
    """Jacobian d sparsemax(z) / dz evaluated at a solution.

    Entry (i, j) is [i in S] * (delta_ij - [j in S] / |S|) where S is the
    support; rows and columns outside the support are zero.
    """
    K = sol.dist.k
    s = sol.dist.support
    J = np.zeros((K, K))
    J[np.ix_(s, s)] = -1.0 / s.size
    J[s, s] += 1.0
    return J


def sharpen(p: ProbDistribution, temperature: float) -> ProbDistribution:
    """Temperature sharpening: p_i^(1/temperature), renormalized.

    Preserves the support (0 maps to 0); temperature in (0, 1) sharpens,
    temperature 1 is the identity.
    """
    if not (isinstance(temperature, (int, float)) and math.isfinite(temperature)):
        raise ValueError("temperature must be a finite number")
    if temperature <= 0.0:
        raise ValueError("temperature must be > 0")
    powered = np.power(p.probs, 1.0 / temperature)
    total = powered.sum()
    if total <= 0.0:
        raise ValueError("sharpening underflowed to zero mass")
    return ProbDistribution(powered / total)


def binary_sparsemax_of_softmax(s: float) -> float:
    """Binary sparsemax probability expressed through the softmax probability.

    For a two-class problem with softmax probability s of the positive class,
    the sparsemax probability of that class under the same logits is

        1                        if s > e / (e + 1)
        (ln(s / (1 - s)) + 1)/2  if 1 / (e + 1) <= s <= e / (e + 1)
        0                        if s < 1 / (e + 1)
    """
    if not (isinstance(s, (int, float)) and math.isfinite(s)):
        raise ValueError("s must be a finite number")
    if s < 0.0 or s > 1.0:
        raise ValueError("s must lie in [0, 1]")
    hi = math.e / (math.e + 1.0)
    lo = 1.0 / (math.e + 1.0)
    if s > hi:
        return 1.0
    if s < lo:
        return 0.0
    return (math.log(s / (1.0 - s)) + 1.0) / 2.0


def softmax_grad_to_logits(grad_p: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. softmax output back to logits."""
    grad_p = np.asarray(grad_p, dtype=np.float64)
    return probs * (grad_p - float(np.dot(probs, grad_p)))


def sparsemax_grad_to_logits(grad_p: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. sparsemax output back to logits.

    On the support the Jacobian subtracts the support mean; off-support rows
    are zero.
    """
    grad_p = np.asarray(grad_p, dtype=np.float64)
    mask = probs > 0.0
    out = np.zeros_like(grad_p)
    out[mask] = grad_p[mask] - grad_p[mask].mean()
    return out


def batch_softmax_grad_to_logits(grad_P: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Row-wise version of softmax_grad_to_logits."""
    inner = np.sum(P * grad_P, axis=1, keepdims=True)
    return P * (grad_P - inner)


def batch_sparsemax_grad_to_logits(grad_P: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Row-wise version of sparsemax_grad_to_logits."""
    mask = P > 0.0
    counts = np.count_nonzero(mask, axis=1, keepdims=True)
    means = np.sum(np.where(mask, grad_P, 0.0), axis=1, keepdims=True) / counts
    return np.where(mask, grad_P - means, 0.0)
