"""Tests for the brute-force verifiers themselves.

The verifiers re-derive everything independently (plain-Python projection,
closed binary forms, grid search, central differences), so these tests pin
their reference values and exercise their reporting before the main suite
leans on them.
"""

import math

import numpy as np
import pytest

from adsharp.oracle import (
    VerifyReport,
    appendixA_reference,
    finite_diff_grad,
    gini_grid_search,
    project_simplex_reference,
    theorem1_fuzz,
)
from adsharp.transforms import sparsemax

E_HI = 0.7310585786300049  # e / (e + 1)
E_LO = 0.2689414213699951  # 1 / (e + 1)
LN_2 = 0.6931471805599453


def test_finite_diff_matches_quadratic_gradient():
    rng = np.random.default_rng(0)
    a = rng.normal(size=5)
    B = rng.normal(size=(5, 5))
    x = rng.normal(size=5)

    def f(v):
        return float(a @ v + v @ B @ v)

    numeric = finite_diff_grad(f, x.copy())
    analytic = a + (B + B.T) @ x
    np.testing.assert_allclose(numeric, analytic, atol=1e-6)


def test_finite_diff_preserves_input():
    x = np.array([0.3, -0.7])
    before = x.copy()
    finite_diff_grad(lambda v: float(np.sum(v**2)), x)
    np.testing.assert_array_equal(x, before)


def test_reference_projection_examples():
    out = project_simplex_reference([0.9, 0.4, 0.1]).probs
    np.testing.assert_allclose(out, [0.75, 0.25, 0.0], atol=1e-15)
    out = project_simplex_reference([5.0, 0.0]).probs
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-15)
    out = project_simplex_reference([0.0, 0.0, 0.0, 0.0]).probs
    np.testing.assert_allclose(out, [0.25] * 4, atol=1e-15)


def test_reference_projection_agrees_with_transform():
    rng = np.random.default_rng(3)
    for _ in range(200):
        z = rng.normal(0.0, 3.0, size=int(rng.integers(2, 8)))
        ref = project_simplex_reference(z).probs
        out = sparsemax(z).dist.probs
        np.testing.assert_allclose(out, ref, atol=1e-9)


def test_binary_reference_midpoint():
    s_prime, t, loss, grad = appendixA_reference(0.5)
    assert s_prime == 0.5
    assert t == 0.5
    assert loss == LN_2
    assert grad == 0.0


def test_binary_reference_saturated_branches():
    assert appendixA_reference(E_HI) == (1.0, 1.0, 0.0, 0.0)
    assert appendixA_reference(0.99) == (1.0, 1.0, 0.0, 0.0)
    assert appendixA_reference(E_LO) == (0.0, 0.0, 0.0, 0.0)
    assert appendixA_reference(0.01) == (0.0, 0.0, 0.0, 0.0)


def test_binary_reference_interior_consistency():
    # the reported gradient treats the distillation target as frozen, so it
    # must match a finite difference of the cross-entropy with t pinned
    h = 1e-7
    for s in (0.45, 0.55, 0.6, 0.7):
        _, t, loss, grad = appendixA_reference(s)
        sp_lo = appendixA_reference(s - h)[0]
        sp_hi = appendixA_reference(s + h)[0]

        def ce(sp, t=t):
            return -(t * math.log(sp) + (1.0 - t) * math.log(1.0 - sp))

        assert grad == pytest.approx((ce(sp_hi) - ce(sp_lo)) / (2 * h), abs=1e-5)
        assert loss > 0.0
    # symmetric in s <-> 1 - s, maximal at the coin flip, shrinking toward
    # the confident edges
    loss_45 = appendixA_reference(0.45)[2]
    loss_55 = appendixA_reference(0.55)[2]
    assert loss_45 == pytest.approx(loss_55, abs=1e-12)
    assert appendixA_reference(0.72)[2] < loss_55 < LN_2


def test_binary_reference_rejects_bad_inputs():
    with pytest.raises(ValueError, match=r"s must lie in \(0, 1\)"):
        appendixA_reference(0.0)
    with pytest.raises(ValueError, match=r"s must lie in \(0, 1\)"):
        appendixA_reference(1.0)
    with pytest.raises(ValueError, match="r = 2"):
        appendixA_reference(0.5, r=3)


def test_gini_grid_search_uniform_and_peaked():
    out = gini_grid_search([0.0, 0.0, 0.0]).probs
    np.testing.assert_allclose(out, [1 / 3] * 3, atol=2e-3)
    out = gini_grid_search([4.0, 0.0, 0.0]).probs
    np.testing.assert_allclose(out, [1.0, 0.0, 0.0], atol=2e-3)


def test_gini_grid_search_matches_projection():
    rng = np.random.default_rng(17)
    for _ in range(25):
        z = rng.normal(0.0, 1.5, size=3)
        grid = gini_grid_search(z).probs
        direct = sparsemax(z).dist.probs
        np.testing.assert_allclose(grid, direct, atol=2e-3)


def test_gini_grid_search_rejects_bad_inputs():
    with pytest.raises(ValueError, match="3 logits"):
        gini_grid_search([1.0, 2.0])
    with pytest.raises(ValueError, match="step"):
        gini_grid_search([0.0, 0.0, 0.0], step=0.1)


def test_zero_loss_fuzz_passes():
    report = theorem1_fuzz(n_samples=2000)
    assert report.passed
    assert report.max_err == 0.0
    assert report.samples >= 2000


def test_report_line_formatting():
    ok = VerifyReport("demo_check", 100, 1.5e-11, 1e-9, True)
    line = ok.line()
    assert line.startswith("demo_check")
    assert "samples=100" in line
    assert "max_err=1.500e-11" in line
    assert "tol=1.0e-09" in line
    assert line.endswith("PASS")

    bad = VerifyReport("demo_check", 7, 2.0, 1e-9, False, notes="first offender")
    line = bad.line()
    assert "FAIL" in line
    assert "first offender" in line
