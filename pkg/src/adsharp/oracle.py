"""Independent brute-force verifiers.

Everything here re-derives results from scratch — plain-Python simplex
projection, closed-form binary-case formulas, exhaustive grid search, and
central finite differences — sharing no numerical code with the modules
under test.  Each check returns a :class:`VerifyReport`; ``run_all_checks``
drives the full suite (the ``verify`` CLI subcommand prints one line per
report).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distill import (
    Strategy,
    StrategyConfig,
    Transform,
    ads_loss,
    batch_strategy_eval,
    batch_strategy_loss,
    batch_strategy_targets,
    corollary1_bounds,
)
from .net import Activation, Gradients, Net, init_net
from .objective import (
    ConsistencyDist,
    ObjectiveConfig,
    batch_consistency_targets,
    consistency_loss,
    supervised_sparsemax_loss,
    total_objective,
)
from .transforms import (
    ProbDistribution,
    batch_softmax,
    batch_sparsemax,
    softmax,
    sparsemax,
)

__all__ = [
    "VerifyReport",
    "project_simplex_reference",
    "finite_diff_grad",
    "appendixA_reference",
    "gini_grid_search",
    "theorem1_fuzz",
    "check_projection",
    "check_masking_bounds",
    "check_binary_closed_forms",
    "check_gradient_audits",
    "check_gini_grid",
    "check_pl_ns_binary",
    "run_all_checks",
]


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of one verification property."""

    name: str
    samples: int
    max_err: float
    tol: float
    passed: bool
    notes: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = (
            f"{self.name:<24s} samples={self.samples:<7d} "
            f"max_err={self.max_err:.3e} tol={self.tol:.1e} {status}"
        )
        if self.notes and not self.passed:
            text += f"  [{self.notes}]"
        return text


def _report(name: str, samples: int, max_err: float, tol: float, notes: str = "") -> VerifyReport:
    return VerifyReport(name, samples, float(max_err), tol, bool(max_err <= tol), notes)


# -- independent reference implementations -------------------------------------


def project_simplex_reference(z) -> ProbDistribution:
    """Euclidean projection onto the probability simplex, written in plain
    Python (sort + running sums) as an independent cross-check."""
    values = [float(v) for v in z]
    ordered = sorted(values, reverse=True)
    running = 0.0
    rho = 0
    rho_sum = 0.0
    for j, value in enumerate(ordered, start=1):
        running += value
        if value - (running - 1.0) / j > 0.0:
            rho = j
            rho_sum = running
    theta = (rho_sum - 1.0) / rho
    return ProbDistribution(np.array([max(v - theta, 0.0) for v in values]))


def finite_diff_grad(f, x: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, coordinate by
    coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.ravel()
    x_flat = x.ravel()
    for i in range(x_flat.size):
        orig = x_flat[i]
        x_flat[i] = orig + step
        hi = f(x)
        x_flat[i] = orig - step
        lo = f(x)
        x_flat[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


_E_HI = math.e / (math.e + 1.0)
_E_LO = 1.0 / (math.e + 1.0)


def appendixA_reference(s: float, r: int = 2) -> tuple[float, float, float, float]:
    """Closed binary-case forms: (s_prime, t, reduced loss, d loss / d s).

    For the two-class problem, the sparse prediction s' of a softmax
    probability s is piecewise linear in logit(s); inside the informed
    interval (1/(e+1), e/(e+1)) the power-2 target t and the reduced
    cross-entropy loss have closed forms in u1 = 1 + logit(s) and
    u0 = 1 - logit(s).  Outside it the prediction is one-hot and loss and
    gradient vanish.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("s must lie in (0, 1)")
    if r != 2:
        raise ValueError("closed forms are derived for r = 2 only")
    if s >= _E_HI:
        return 1.0, 1.0, 0.0, 0.0
    if s <= _E_LO:
        return 0.0, 0.0, 0.0, 0.0
    logit = math.log(s / (1.0 - s))
    u1 = 1.0 + logit
    u0 = 1.0 - logit
    s_prime = u1 / 2.0
    denom = u1 * u1 + u0 * u0
    t = u1 * u1 / denom
    loss = -(t * math.log(s_prime) + (1.0 - t) * math.log(u0 / 2.0))
    grad = (1.0 / s + 1.0 / (1.0 - s)) * (u0 - u1) / denom
    return s_prime, t, loss, grad


def gini_grid_search(z, step: float = 1e-3) -> ProbDistribution:
    """Exhaustive grid maximizer of <z, p> + 0.5 * sum p_i (1 - p_i) over the
    2-simplex (K = 3 only)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (3,):
        raise ValueError("gini_grid_search expects exactly 3 logits")
    if not (0.0 < step <= 1e-3):
        raise ValueError("step must lie in (0, 1e-3]")
    p1_grid = np.arange(0.0, 1.0 + step / 2.0, step)
    best_val = -np.inf
    best = None
    for p1 in p1_grid:
        p2 = np.arange(0.0, (1.0 - p1) + step / 2.0, step)
        p3 = np.maximum(1.0 - p1 - p2, 0.0)
        vals = (
            z[0] * p1
            + z[1] * p2
            + z[2] * p3
            + 0.5 * (p1 * (1.0 - p1) + p2 * (1.0 - p2) + p3 * (1.0 - p3))
        )
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val = float(vals[i])
            best = np.array([p1, p2[i], p3[i]])
    return ProbDistribution(best / best.sum())


# -- verification checks --------------------------------------------------------


def check_projection(n_samples: int = 1000, seed: int = 11) -> VerifyReport:
    """Sparse transform vs. the independent simplex projection, plus exact
    simplex-constraint and support-consistency checks."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for i in range(n_samples):
        k = 2 + i % 9
        z = rng.normal(0.0, 3.0, size=k)
        if i % 7 == 0:  # inject ties
            z = np.round(z, 1)
        sol = sparsemax(z)
        ref = project_simplex_reference(z)
        err = float(np.max(np.abs(sol.dist.probs - ref.probs)))
        if abs(sol.dist.probs.sum() - 1.0) > 1e-12 or np.any(sol.dist.probs < 0.0):
            err = math.inf
        if sol.k_support != int(np.count_nonzero(sol.dist.probs > 0.0)):
            err = math.inf
        max_err = max(max_err, err)
    return _report("projection_equivalence", n_samples, max_err, 1e-9)


def theorem1_fuzz(
    n_samples: int = 10000, K_range: tuple[int, int] = (3, 10), seed: int = 23
) -> VerifyReport:
    """Fuzz the zero-loss condition of adaptive sharpening.

    For random logits, the loss must be exactly zero iff the softmax top-two
    ratio reaches e (or the prediction is uniform), and strictly positive
    otherwise.  Constructed gap-1 boundary logits (top-two ratio exactly e)
    and all-equal logits must yield exactly zero loss.
    """
    rng = np.random.default_rng(seed)
    cfg = StrategyConfig(kind=Strategy.ADAPTIVE_SHARPEN, power=2.0)
    k_lo, k_hi = K_range
    bad: list[str] = []
    checked = 0
    for k in range(k_lo, k_hi + 1):
        tail = 0.5 - 0.5 * np.arange(1, k - 1)
        boundary = np.concatenate([[1.5, 0.5], tail])
        if ads_loss(boundary, cfg).loss != 0.0:
            bad.append(f"boundary K={k}")
        if ads_loss(np.zeros(k), cfg).loss != 0.0:
            bad.append(f"uniform K={k}")
        checked += 2
    for _ in range(n_samples):
        k = int(rng.integers(k_lo, k_hi + 1))
        z = rng.normal(0.0, 2.0, size=k)
        p = softmax(z)
        top2 = np.sort(p.probs)[-2:]
        predicate = top2[1] >= math.e * top2[0]
        loss = ads_loss(z, cfg).loss
        if predicate and loss != 0.0:
            bad.append(f"predicate true but loss={loss!r} z={z.tolist()}")
        elif not predicate and not p.is_uniform() and not loss > 0.0:
            bad.append(f"predicate false but loss={loss!r} z={z.tolist()}")
        checked += 1
    notes = "; ".join(bad[:3])
    return _report("onehot_zero_loss_fuzz", checked, float(len(bad)), 0.0, notes)


def check_masking_bounds(n_per_k: int = 100000, seed: int = 31) -> VerifyReport:
    """Empirical masking transition vs. the closed-form threshold interval.

    For each K, every masked (one-hot sparse) sample must have softmax max
    probability >= e/(e+K-1) and every unmasked sample <= e/(e+1); the K=2
    interval must collapse to e/(e+1) exactly.
    """
    rng = np.random.default_rng(seed)
    max_err = 0.0
    total = 0
    for k in (2, 5, 10):
        lo, hi, _, _ = corollary1_bounds(k, 1)
        Z = rng.normal(0.0, 2.0, size=(n_per_k, k))
        _, _, k_support = batch_sparsemax(Z)
        p1 = np.max(batch_softmax(Z), axis=1)
        masked = k_support == 1
        if np.any(masked):
            max_err = max(max_err, float(lo - np.min(p1[masked])))
        if np.any(~masked):
            max_err = max(max_err, float(np.max(p1[~masked]) - hi))
        total += n_per_k
    lo2, hi2, _, _ = corollary1_bounds(2, 1)
    max_err = max(max_err, abs(hi2 - lo2), abs(lo2 - math.e / (math.e + 1.0)))
    return _report("masking_threshold_bounds", total, max_err, 1e-12)


def check_binary_closed_forms(n_grid: int = 10000, seed: int = 0) -> VerifyReport:
    """K=2 pipeline (sparse transform + power-2 target + loss + gradient)
    against the closed-form reference, on a grid of softmax probabilities."""
    cfg = StrategyConfig(kind=Strategy.ADAPTIVE_SHARPEN, power=2.0)
    grid = np.concatenate([np.linspace(0.001, 0.999, n_grid), [0.5]])
    max_err = 0.0
    for s in grid:
        z = np.array([math.log(s), math.log(1.0 - s)])
        sol = sparsemax(z)
        res = ads_loss(z, cfg)
        q = res.target.q.probs
        entropy = -float(np.sum(q[q > 0.0] * np.log(q[q > 0.0])))
        ce = res.loss + entropy
        grad_s = res.grad_logits[0] / s - res.grad_logits[1] / (1.0 - s)
        s_ref, t_ref, loss_ref, grad_ref = appendixA_reference(float(s))
        err = max(
            abs(float(sol.dist.probs[0]) - s_ref),
            abs(float(q[0]) - t_ref),
            abs(ce - loss_ref),
            abs(grad_s - grad_ref),
        )
        max_err = max(max_err, err)
    mid = appendixA_reference(0.5)
    if mid[0] != 0.5 or mid[1] != 0.5 or mid[3] != 0.0:
        max_err = math.inf
    return _report("binary_closed_forms", grid.size, max_err, 1e-10)


# -- gradient audits -------------------------------------------------------------


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    return float(
        np.max(np.abs(analytic - numeric)) / max(1.0, float(np.max(np.abs(analytic))))
    )


def _support_stable(z: np.ndarray, margin: float = 1e-3) -> bool:
    sol = sparsemax(z)
    tau = sol.tau
    gaps = z - tau
    on = sol.dist.probs > 0.0
    return bool(np.all(gaps[on] > margin) and np.all(gaps[~on] < -margin))


def _strategy_smooth(z: np.ndarray, cfg: StrategyConfig, margin: float = 1e-3) -> bool:
    if cfg.kind == Strategy.ADAPTIVE_SHARPEN or cfg.transform == Transform.SPARSEMAX:
        if not _support_stable(z, margin):
            return False
    p = batch_softmax(z[None, :])[0] if cfg.transform == Transform.SOFTMAX else None
    if cfg.kind == Strategy.PSEUDO_LABEL:
        probs = p if p is not None else sparsemax(z).dist.probs
        if abs(float(np.max(probs)) - cfg.pl_threshold) < margin:
            return False
        if float(np.max(probs)) < 1e-6:
            return False
    if cfg.kind == Strategy.NEGATIVE_SAMPLE:
        probs = p if p is not None else sparsemax(z).dist.probs
        thr = cfg.ns_threshold if cfg.ns_threshold is not None else 1.0 / z.size
        if np.any(np.abs(probs - thr) < margin):
            return False
        neg = probs < thr
        if np.any(neg) and 1.0 - float(np.sum(probs[neg])) < margin:
            return False
    return True


def check_fd_strategies(seed: int = 5, per_combo: int = 12) -> VerifyReport:
    """Analytic strategy gradients vs. central differences with targets
    frozen, at smooth points, across every strategy x transform combo."""
    rng = np.random.default_rng(seed)
    combos: list[StrategyConfig] = [StrategyConfig(kind=Strategy.ADAPTIVE_SHARPEN)]
    for kind in (
        Strategy.MIN_ENTROPY,
        Strategy.SHARPEN,
        Strategy.PSEUDO_LABEL,
        Strategy.NEGATIVE_SAMPLE,
        Strategy.FIXED_TOP_M,
    ):
        for transform in (Transform.SOFTMAX, Transform.SPARSEMAX):
            combos.append(
                StrategyConfig(kind=kind, transform=transform, pl_threshold=0.55)
            )
    max_err = 0.0
    samples = 0
    for cfg in combos:
        accepted = 0
        attempts = 0
        while accepted < per_combo:
            attempts += 1
            if attempts > 20000:
                raise RuntimeError(f"could not find smooth points for {cfg.kind}")
            z = rng.normal(0.0, 1.5, size=4)
            if not _strategy_smooth(z, cfg):
                continue
            tgt = batch_strategy_targets(z[None, :], cfg)
            if not tgt.selected[0]:
                continue
            if tgt.q is not None:
                # keep clear of the log clamp on the target support
                probs = (
                    sparsemax(z).dist.probs
                    if cfg.kind == Strategy.ADAPTIVE_SHARPEN
                    or cfg.transform == Transform.SPARSEMAX
                    else batch_softmax(z[None, :])[0]
                )
                if np.any(probs[tgt.q[0] > 0.0] < 1e-6):
                    continue
            analytic = batch_strategy_eval(z[None, :], cfg, tgt)[1][0]

            def f(v, cfg=cfg, tgt=tgt):
                return float(batch_strategy_eval(v[None, :], cfg, tgt)[0][0])

            numeric = finite_diff_grad(f, z.copy())
            max_err = max(max_err, _rel_err(analytic, numeric))
            accepted += 1
            samples += 1
    return _report("grad_strategies", samples, max_err, 1e-5)


def check_fd_supervised(seed: int = 7, n_samples: int = 50) -> VerifyReport:
    """Supervised loss gradient vs. central differences."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    accepted = 0
    attempts = 0
    while accepted < n_samples:
        attempts += 1
        if attempts > 20000:
            raise RuntimeError("could not find smooth points for the supervised loss")
        k = int(rng.integers(2, 7))
        z = rng.normal(0.0, 1.5, size=k)
        if not _support_stable(z):
            continue
        y = np.zeros(k)
        y[int(rng.integers(0, k))] = 1.0
        _, analytic = supervised_sparsemax_loss(z, y)
        numeric = finite_diff_grad(lambda v: supervised_sparsemax_loss(v, y)[0], z.copy())
        max_err = max(max_err, _rel_err(analytic, numeric))
        accepted += 1
    return _report("grad_supervised", accepted, max_err, 1e-5)


def check_fd_consistency(seed: int = 9, per_combo: int = 12) -> VerifyReport:
    """Consistency-distance gradient (anchor frozen) vs. central
    differences, for both distances and both transforms."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    samples = 0
    for dist in (ConsistencyDist.KL, ConsistencyDist.L2):
        for transform in (Transform.SOFTMAX, Transform.SPARSEMAX):
            cfg = ObjectiveConfig(
                alpha=1.0, consistency_dist=dist, consistency_transform=transform
            )
            accepted = 0
            attempts = 0
            while accepted < per_combo:
                attempts += 1
                if attempts > 20000:
                    raise RuntimeError(f"could not find smooth points for {dist}")
                z = rng.normal(0.0, 1.0, size=4)
                z_prime = z + rng.normal(0.0, 0.3, size=4)
                if transform == Transform.SPARSEMAX and not (
                    _support_stable(z) and _support_stable(z_prime)
                ):
                    continue
                if dist == ConsistencyDist.KL:
                    # moving-side probabilities on the anchor support must sit
                    # clear of the log clamp
                    pa = batch_consistency_targets(z[None, :], cfg)[0]
                    pm = batch_consistency_targets(z_prime[None, :], cfg)[0]
                    if np.any(pm[pa > 0.0] < 1e-6):
                        continue
                _, analytic = consistency_loss(z, z_prime, cfg)
                numeric = finite_diff_grad(
                    lambda v: consistency_loss(z, v, cfg)[0], z_prime.copy()
                )
                max_err = max(max_err, _rel_err(analytic, numeric))
                accepted += 1
                samples += 1
    return _report("grad_consistency", samples, max_err, 1e-5)


def _flatten_params(net: Net) -> np.ndarray:
    parts = []
    for w, b in zip(net.weights, net.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def _assign_params(net: Net, vec: np.ndarray) -> None:
    offset = 0
    for i in range(net.n_layers):
        w, b = net.weights[i], net.biases[i]
        net.weights[i] = vec[offset : offset + w.size].reshape(w.shape).copy()
        offset += w.size
        net.biases[i] = vec[offset : offset + b.size].copy()
        offset += b.size


def _flatten_grads(grads: Gradients) -> np.ndarray:
    parts = []
    for w, b in zip(grads.weights, grads.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def check_fd_network(seed: int = 13) -> VerifyReport:
    """Backpropagation on a small tanh network vs. central differences over
    every parameter and every input coordinate."""
    rng = np.random.default_rng(seed)
    net = init_net((2, 4, 2), Activation.TANH, seed=seed)
    X = rng.normal(0.0, 1.0, size=(5, 2))
    G = rng.normal(0.0, 1.0, size=(5, 2))

    net.forward(X)
    grads = net.backward(G)
    analytic = np.concatenate([_flatten_grads(grads), grads.inputs.ravel()])

    theta0 = _flatten_params(net)

    def f_params(vec):
        probe = net.clone()
        _assign_params(probe, vec)
        return float(np.sum(G * probe.forward(X, cache=False)))

    def f_inputs(x_flat):
        return float(np.sum(G * net.forward(x_flat.reshape(5, 2), cache=False)))

    numeric = np.concatenate(
        [finite_diff_grad(f_params, theta0), finite_diff_grad(f_inputs, X.ravel())]
    )
    return _report("grad_network", analytic.size, _rel_err(analytic, numeric), 1e-6)


def check_fd_total_objective(seed: int = 4) -> VerifyReport:
    """Full combined objective on a 2-8-2 net vs. central differences over
    all parameters, replaying frozen targets."""
    rng = np.random.default_rng(seed)
    net = init_net((2, 8, 2), Activation.TANH, seed=seed)
    X_l = rng.normal(0.0, 1.0, size=(3, 2))
    y_l = np.array([0, 1, 0])
    X_u = rng.normal(0.0, 1.0, size=(4, 2))
    X_up = X_u + rng.normal(0.0, 0.05, size=X_u.shape)
    strategy = StrategyConfig(kind=Strategy.ADAPTIVE_SHARPEN, power=2.0)
    cfg = ObjectiveConfig(
        alpha=0.7,
        beta=1.3,
        consistency_dist=ConsistencyDist.KL,
        consistency_transform=Transform.SPARSEMAX,
    )
    _, grads, pack = total_objective(
        (X_l, y_l), (X_u, X_up), strategy, cfg, net, return_targets=True
    )
    analytic = _flatten_grads(grads)
    theta0 = _flatten_params(net)

    def f(vec):
        probe = net.clone()
        _assign_params(probe, vec)
        breakdown, _ = total_objective(
            (X_l, y_l), (X_u, X_up), strategy, cfg, probe, frozen=pack
        )
        return breakdown.total

    numeric = finite_diff_grad(f, theta0)
    return _report("grad_total_objective", theta0.size, _rel_err(analytic, numeric), 1e-4)


def check_gradient_audits() -> list[VerifyReport]:
    return [
        check_fd_strategies(),
        check_fd_supervised(),
        check_fd_consistency(),
        check_fd_network(),
        check_fd_total_objective(),
    ]


def check_gini_grid(n_samples: int = 100, seed: int = 17, step: float = 1e-3) -> VerifyReport:
    """Grid-search maximizer of the Gini-regularized problem vs. the sparse
    transform."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(n_samples):
        z = rng.normal(0.0, 1.5, size=3)
        grid = gini_grid_search(z, step)
        direct = sparsemax(z).dist
        max_err = max(max_err, float(np.max(np.abs(grid.probs - direct.probs))))
    return _report("gini_grid_argmax", n_samples, max_err, 2e-3)


def check_pl_ns_binary(n_grid: int = 10000, seed: int = 0) -> VerifyReport:
    """Pseudo-labeling with threshold t and negative sampling with 1-t must
    coincide (selection, loss, gradient) on binary softmax inputs away from
    the thresholds."""
    tau_pl = 0.7
    s = np.linspace(0.05, 0.95, n_grid)
    s = s[
        (np.abs(s - tau_pl) > 1e-6) & (np.abs(s - (1.0 - tau_pl)) > 1e-6)
    ]
    Z = np.column_stack([np.log(s / (1.0 - s)), np.zeros(s.size)])
    pl_cfg = StrategyConfig(
        kind=Strategy.PSEUDO_LABEL, transform=Transform.SOFTMAX, pl_threshold=tau_pl
    )
    ns_cfg = StrategyConfig(
        kind=Strategy.NEGATIVE_SAMPLE, transform=Transform.SOFTMAX, ns_threshold=1.0 - tau_pl
    )
    pl_losses, pl_grads, pl_sel = batch_strategy_loss(Z, pl_cfg)
    ns_losses, ns_grads, ns_sel = batch_strategy_loss(Z, ns_cfg)
    max_err = max(
        float(np.max(np.abs(pl_losses - ns_losses))),
        float(np.max(np.abs(pl_grads - ns_grads))),
    )
    if np.any(pl_sel != ns_sel):
        max_err = math.inf
    return _report("pl_ns_binary_match", s.size, max_err, 1e-12)


def run_all_checks() -> list[VerifyReport]:
    """The full verification suite, in order."""
    reports = [
        check_projection(),
        theorem1_fuzz(),
        check_masking_bounds(),
        check_binary_closed_forms(),
    ]
    reports.extend(check_gradient_audits())
    reports.append(check_gini_grid())
    reports.append(check_pl_ns_binary())
    return reports
