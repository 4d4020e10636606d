"""Evaluation metrics: confidence, sparsity, accuracy, and histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import Net
from .transforms import batch_softmax, batch_sparsemax

__all__ = [
    "RunMetrics",
    "avg_dominant_probability",
    "avg_sparsity_and_topm",
    "prediction_histogram",
    "test_error",
]

HISTOGRAM_BINS = 10


@dataclass(frozen=True)
class RunMetrics:
    """One epoch's worth of training diagnostics."""

    epoch: int
    j_s: float
    j_c: float
    j_d: float
    total: float
    test_error: float
    p_bar_1: float
    m_bar: float
    top_m_acc: float
    histogram: np.ndarray  # (10,) softmax-probability bin counts


def _pool_logits(net: Net, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("pool must be a nonempty (N, D) array")
    return net.forward(X, cache=False)


def avg_dominant_probability(net: Net, X: np.ndarray) -> float:
    """Mean maximum softmax probability over a pool (p-bar-1).

    Always reads the softmax head so runs trained with different transforms
    stay comparable.
    """
    P = batch_softmax(_pool_logits(net, X))
    return float(np.mean(np.max(P, axis=1)))


def avg_sparsity_and_topm(net: Net, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean sparsemax support size (m-bar) and top-m accuracy.

    Top-m accuracy is the fraction of examples whose true label falls inside
    their own sparsemax support.
    """
    P, _, k_support = batch_sparsemax(_pool_logits(net, X))
    y = np.asarray(y)
    if y.shape != (P.shape[0],):
        raise ValueError("y must match the pool size")
    in_support = P[np.arange(P.shape[0]), y] > 0.0
    return float(np.mean(k_support)), float(np.mean(in_support))


def prediction_histogram(net: Net, X: np.ndarray) -> np.ndarray:
    """Counts of all K*N softmax probabilities in ten uniform [0,1] bins.

    Bin b holds values in [b/10, (b+1)/10), except the last bin which also
    includes 1.0.
    """
    P = batch_softmax(_pool_logits(net, X))
    idx = np.minimum((P * HISTOGRAM_BINS).astype(np.int64), HISTOGRAM_BINS - 1)
    return np.bincount(idx.ravel(), minlength=HISTOGRAM_BINS)


def test_error(net: Net, X: np.ndarray, y: np.ndarray) -> float:
    """Fraction of argmax-logit predictions that differ from the labels."""
    logits = _pool_logits(net, X)
    y = np.asarray(y)
    if y.shape != (logits.shape[0],):
        raise ValueError("y must match the pool size")
    return float(np.mean(np.argmax(logits, axis=1) != y))
