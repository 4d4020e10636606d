"""Probability-transform unit tests: softmax, sparsemax, sharpening, chains."""

import math

import numpy as np
import pytest

from adsharp.oracle import finite_diff_grad, project_simplex_reference
from adsharp.transforms import (
    ProbDistribution,
    batch_softmax,
    batch_softmax_grad_to_logits,
    batch_sparsemax,
    batch_sparsemax_grad_to_logits,
    binary_sparsemax_of_softmax,
    sharpen,
    softmax,
    softmax_grad_to_logits,
    sparsemax,
    sparsemax_grad_to_logits,
    sparsemax_jacobian,
)

E_HI = 0.7310585786300049  # e / (e + 1)
E_LO = 0.2689414213699951  # 1 / (e + 1)


def test_sparsemax_worked_example():
    sol = sparsemax(np.array([0.5, 0.0, -1.0]))
    np.testing.assert_allclose(sol.dist.probs, [0.75, 0.25, 0.0], atol=1e-15)
    assert sol.tau == pytest.approx(-0.25, abs=1e-15)
    assert sol.k_support == 2


def test_sparsemax_matches_reference_projection():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(300):
        k = int(rng.integers(2, 11))
        z = rng.normal(0.0, 2.0, size=k)
        if rng.random() < 0.25:
            z = np.round(z, 1)  # inject ties
        got = sparsemax(z).dist.probs
        want = project_simplex_reference(z).probs
        worst = max(worst, float(np.max(np.abs(got - want))))
    assert worst <= 1e-9


def test_sparsemax_output_is_valid_distribution():
    rng = np.random.default_rng(3)
    for _ in range(100):
        z = rng.normal(0.0, 3.0, size=int(rng.integers(2, 8)))
        sol = sparsemax(z)
        p = sol.dist.probs
        assert abs(p.sum() - 1.0) <= 1e-12
        assert np.all(p >= 0.0)
        assert sol.k_support == int(np.sum(p > 0.0))


def test_sparsemax_shift_invariance():
    z = np.array([0.3, -0.7, 1.2, 0.0])
    base = sparsemax(z)
    shifted = sparsemax(z + 5.5)
    np.testing.assert_allclose(base.dist.probs, shifted.dist.probs, atol=1e-12)
    assert shifted.tau == pytest.approx(base.tau + 5.5, abs=1e-12)


def test_softmax_shift_invariance_and_overflow_guard():
    z = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(softmax(z).probs, softmax(z + 123.0).probs, atol=1e-15)
    huge = softmax(np.array([1000.0, 999.0, 0.0])).probs
    assert np.all(np.isfinite(huge))
    assert abs(huge.sum() - 1.0) <= 1e-12


def test_sparsemax_one_hot_at_unit_gap():
    # A logit lead of exactly 1 is the smallest gap that zeroes the runner-up.
    sol = sparsemax(np.array([1.0, 0.0]))
    np.testing.assert_array_equal(sol.dist.probs, [1.0, 0.0])
    assert sol.k_support == 1
    sol = sparsemax(np.array([0.999, 0.0]))
    assert sol.k_support == 2


def test_binary_sparsemax_of_softmax_piecewise():
    assert binary_sparsemax_of_softmax(0.5) == 0.5
    assert binary_sparsemax_of_softmax(E_HI) == pytest.approx(1.0, abs=1e-12)
    assert binary_sparsemax_of_softmax(0.9) == 1.0
    assert binary_sparsemax_of_softmax(E_LO) == pytest.approx(0.0, abs=1e-12)
    assert binary_sparsemax_of_softmax(0.05) == 0.0
    for s in np.linspace(0.01, 0.99, 197):
        z = np.array([math.log(s) - math.log(1.0 - s), 0.0])
        want = sparsemax(z).dist.probs[0]
        assert binary_sparsemax_of_softmax(float(s)) == pytest.approx(want, abs=1e-12)


def test_sparsemax_jacobian_structure():
    sol = sparsemax(np.array([0.5, 0.0, -1.0]))
    J = sparsemax_jacobian(sol)
    # support {0, 1}: J = I - 1/|S| on the support block, zero elsewhere
    np.testing.assert_allclose(J, [[0.5, -0.5, 0.0], [-0.5, 0.5, 0.0], [0.0, 0.0, 0.0]], atol=1e-15)


def test_sparsemax_jacobian_matches_finite_differences():
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 25:
        z = rng.normal(0.0, 2.0, size=4)
        sol = sparsemax(z)
        # keep away from support changes so the directional FD is clean
        gaps = np.abs(np.sort(z)[::-1] - sol.tau)
        if np.min(gaps) < 1e-3:
            continue
        g = rng.normal(size=4)
        analytic = sparsemax_jacobian(sol).T @ g
        numeric = finite_diff_grad(lambda v: float(g @ sparsemax(v).dist.probs), z)
        assert np.max(np.abs(analytic - numeric)) <= 1e-6
        checked += 1


def test_sharpen_examples():
    p = ProbDistribution(np.array([0.5, 0.25, 0.25]))
    np.testing.assert_allclose(sharpen(p, 0.5).probs, [2 / 3, 1 / 6, 1 / 6], atol=1e-15)
    np.testing.assert_allclose(sharpen(p, 1.0).probs, p.probs, atol=1e-15)
    uniform = ProbDistribution(np.full(4, 0.25))
    np.testing.assert_allclose(sharpen(uniform, 0.3).probs, uniform.probs, atol=1e-15)


def test_sharpen_preserves_zeros():
    p = ProbDistribution(np.array([0.75, 0.25, 0.0]))
    q = sharpen(p, 0.5)
    assert q.probs[2] == 0.0
    np.testing.assert_allclose(q.probs[:2], [0.9, 0.1], atol=1e-15)


def test_sharpen_rejects_bad_temperature():
    p = ProbDistribution(np.array([0.6, 0.4]))
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            sharpen(p, bad)


def test_grad_chains_match_finite_differences():
    rng = np.random.default_rng(11)
    for _ in range(20):
        z = rng.normal(0.0, 1.5, size=5)
        g = rng.normal(size=5)

        p_soft = softmax(z).probs
        analytic = softmax_grad_to_logits(g, p_soft)
        numeric = finite_diff_grad(lambda v: float(g @ softmax(v).probs), z)
        assert np.max(np.abs(analytic - numeric)) <= 1e-6

        sol = sparsemax(z)
        gaps = np.abs(np.sort(z)[::-1] - sol.tau)
        if np.min(gaps) < 1e-3:
            continue
        analytic = sparsemax_grad_to_logits(g, sol.dist.probs)
        numeric = finite_diff_grad(lambda v: float(g @ sparsemax(v).dist.probs), z)
        assert np.max(np.abs(analytic - numeric)) <= 1e-6


def test_batch_transforms_match_per_example():
    rng = np.random.default_rng(13)
    Z = rng.normal(0.0, 2.0, size=(40, 6))
    P_soft = batch_softmax(Z)
    P_sparse, tau, k = batch_sparsemax(Z)
    for i in range(Z.shape[0]):
        np.testing.assert_allclose(P_soft[i], softmax(Z[i]).probs, atol=1e-12)
        sol = sparsemax(Z[i])
        np.testing.assert_allclose(P_sparse[i], sol.dist.probs, atol=1e-12)
        assert tau[i] == pytest.approx(sol.tau, abs=1e-12)
        assert k[i] == sol.k_support


def test_batch_grad_chains_match_per_example():
    rng = np.random.default_rng(17)
    Z = rng.normal(0.0, 2.0, size=(25, 5))
    G = rng.normal(size=(25, 5))
    P_soft = batch_softmax(Z)
    P_sparse = batch_sparsemax(Z)[0]
    got_soft = batch_softmax_grad_to_logits(G, P_soft)
    got_sparse = batch_sparsemax_grad_to_logits(G, P_sparse)
    for i in range(Z.shape[0]):
        np.testing.assert_allclose(got_soft[i], softmax_grad_to_logits(G[i], P_soft[i]), atol=1e-12)
        np.testing.assert_allclose(
            got_sparse[i], sparsemax_grad_to_logits(G[i], P_sparse[i]), atol=1e-12
        )


def test_input_validation():
    with pytest.raises(ValueError):
        softmax(np.array([1.0]))
    with pytest.raises(ValueError):
        sparsemax(np.array([[1.0, 2.0]]))
    with pytest.raises(ValueError):
        softmax(np.array([1.0, math.nan]))
    with pytest.raises(ValueError):
        ProbDistribution(np.array([0.7, 0.4]))
    with pytest.raises(ValueError):
        ProbDistribution(np.array([1.2, -0.2]))


def test_prob_distribution_helpers():
    p = ProbDistribution(np.array([0.75, 0.25, 0.0]))
    np.testing.assert_array_equal(p.support, [0, 1])
    assert not p.is_one_hot() and not p.is_uniform()
    assert ProbDistribution(np.array([1.0, 0.0])).is_one_hot()
    assert ProbDistribution(np.full(5, 0.2)).is_uniform()
    assert p.k == 3
