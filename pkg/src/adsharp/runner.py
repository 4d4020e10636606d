"""Experiment runner: configs, the training loop, and strategy sweeps.

Experiments are described by a flat ``key = value`` config file.  Each run
trains one network and writes four artifacts into its output directory:
``config.echo`` (the effective config), ``metrics.csv`` (one row per epoch
plus an epoch-0 snapshot), ``histogram.csv`` (prediction-value bins), and
``checkpoint.bin``.  Runs are byte-for-byte deterministic in (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .data import (
    AugmentKind,
    Dataset,
    augment,
    circle_centers,
    load_csv,
    make_blobs,
    make_two_moons,
    split_semi,
)
from .distill import Strategy, StrategyConfig, Transform
from .errors import ConfigError
from .metrics import (
    RunMetrics,
    avg_dominant_probability,
    avg_sparsity_and_topm,
    prediction_histogram,
    test_error,
)
from .net import Net, init_net, make_optimizer, sgd_step
from .objective import (
    ConsistencyDist,
    ConsistencySource,
    ObjectiveConfig,
    batch_vat_perturbation,
    total_objective,
)

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "parse_config",
    "parse_config_text",
    "run_experiment",
    "run_sweep",
    "format_sweep_table",
]

METRICS_COLUMNS = (
    "epoch",
    "j_s",
    "j_c",
    "j_d",
    "total",
    "test_error",
    "p_bar_1",
    "m_bar",
    "top_m_acc",
)
HISTOGRAM_COLUMNS = ("epoch",) + tuple(f"bin_{i}" for i in range(10))
CONVERGED_WINDOW = 20


@dataclass
class ExperimentConfig:
    """Every tunable of one experiment; field names double as config keys.

    ``ns_threshold = 0`` means "use 1/K"; ``hidden_dims`` is a comma list
    (empty for a linear model).
    """

    dataset: str = "two_moons"
    n_samples: int = 1206
    noise_std: float = 0.1
    n_classes: int = 2
    blob_radius: float = 6.0
    blob_spread: float = 0.5
    csv_path: str = ""
    labels_per_class: int = 3
    test_fraction: float = 0.2
    hidden_dims: str = "16,16"
    activation: str = "tanh"
    init_scheme: str = "normal"
    strategy: str = "ads"
    transform: str = "softmax"
    power: float = 2.0
    temperature: float = 0.5
    pl_threshold: float = 0.95
    ns_threshold: float = 0.0
    m_fixed: int = 2
    alpha: float = 4.0
    beta: float = 0.7
    consistency_dist: str = "l2"
    consistency_transform: str = "sparsemax"
    consistency_source: str = "augment"
    augment_kind: str = "gaussian_jitter"
    augment_magnitude: float = 0.2
    epsilon_vat: float = 1.0
    distill_augmented: bool = False
    epochs: int = 200
    labeled_batch_size: int = 64
    unlabeled_batch_size: int = 64
    learning_rate: float = 0.03
    momentum: float = 0.9
    seed: int = 1
    out_dir: str = "runs/exp"

    def hidden_dims_tuple(self) -> tuple[int, ...]:
        text = self.hidden_dims.strip()
        if not text:
            return ()
        try:
            dims = tuple(int(part) for part in text.split(","))
        except ValueError:
            raise ConfigError(f"hidden_dims must be a comma list of integers: {self.hidden_dims!r}")
        if any(d < 1 for d in dims):
            raise ConfigError("hidden_dims entries must be >= 1")
        return dims

    def to_text(self) -> str:
        lines = [f"{f.name} = {_format_value(getattr(self, f.name))}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _coerce(key: str, text: str, target_type: type):
    text = text.strip()
    try:
        if target_type is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"config key {key!r}: cannot parse {text!r} as {target_type.__name__}")


def parse_config_text(text: str, overrides: tuple[str, ...] = ()) -> ExperimentConfig:
    """Parse flat ``key = value`` lines ('#' comments allowed).

    Unknown or repeated keys are rejected.  ``overrides`` are extra
    ``key=value`` strings applied on top (repeats allowed there).
    """
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    type_map = {"str": str, "int": int, "float": float, "bool": bool}
    values: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        seen.add(key)
        values[key] = _coerce(key, value, type_map[types[key]])
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"override: unknown key {key!r}")
        values[key] = _coerce(key, value, type_map[types[key]])
    return ExperimentConfig(**values)


def parse_config(path: str | Path, overrides: tuple[str, ...] = ()) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), overrides)


def _build_strategy(cfg: ExperimentConfig) -> StrategyConfig:
    try:
        return StrategyConfig(
            kind=Strategy(cfg.strategy),
            transform=Transform(cfg.transform),
            power=cfg.power,
            temperature=cfg.temperature,
            pl_threshold=cfg.pl_threshold,
            ns_threshold=cfg.ns_threshold if cfg.ns_threshold != 0.0 else None,
            m_fixed=cfg.m_fixed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_objective(cfg: ExperimentConfig) -> ObjectiveConfig:
    try:
        return ObjectiveConfig(
            alpha=cfg.alpha,
            beta=cfg.beta,
            consistency_dist=ConsistencyDist(cfg.consistency_dist),
            consistency_transform=Transform(cfg.consistency_transform),
            epsilon_vat=cfg.epsilon_vat,
            distill_augmented=cfg.distill_augmented,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _build_dataset(cfg: ExperimentConfig, seed: int) -> Dataset:
    try:
        if cfg.dataset == "two_moons":
            return make_two_moons(cfg.n_samples, cfg.noise_std, seed)
        if cfg.dataset == "blobs":
            centers = circle_centers(cfg.n_classes, cfg.blob_radius)
            return make_blobs(cfg.n_samples, centers, cfg.blob_spread, seed)
        if cfg.dataset == "csv":
            if not cfg.csv_path:
                raise ConfigError("dataset csv requires csv_path")
            return load_csv(cfg.csv_path, cfg.n_classes)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown dataset {cfg.dataset!r}")


def _derived_seeds(seed: int) -> tuple[int, int, int, int]:
    children = np.random.SeedSequence(seed).spawn(4)
    return tuple(int(child.generate_state(1, np.uint32)[0]) for child in children)


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if cfg.labeled_batch_size < 1 or cfg.unlabeled_batch_size < 1:
        raise ConfigError("batch sizes must be >= 1")
    if not (math.isfinite(cfg.learning_rate) and cfg.learning_rate > 0.0):
        raise ConfigError("learning_rate must be > 0")
    if not (0.0 <= cfg.momentum < 1.0):
        raise ConfigError("momentum must lie in [0, 1)")
    if not (0.0 < cfg.test_fraction < 1.0):
        raise ConfigError("test_fraction must lie in (0, 1)")
    try:
        ConsistencySource(cfg.consistency_source)
        AugmentKind(cfg.augment_kind)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_row(handle, values) -> None:
    handle.write(",".join(_format_value(v) for v in values) + "\n")
    handle.flush()


def run_experiment(cfg: ExperimentConfig) -> tuple[list[RunMetrics], Net]:
    """Train one experiment and write its artifacts to ``cfg.out_dir``.

    Returns the per-epoch metric history (index 0 is the untrained
    snapshot, whose loss columns are zero) and the trained network.
    """
    _validate(cfg)
    strategy = _build_strategy(cfg)
    objective_cfg = _build_objective(cfg)
    data_seed, split_seed, init_seed, train_seed = _derived_seeds(cfg.seed)

    ds = _build_dataset(cfg, data_seed)
    split = split_semi(ds, cfg.labels_per_class, cfg.test_fraction, split_seed)
    X_l, y_l = ds.features[split.labeled_idx], ds.labels[split.labeled_idx]
    X_u, y_u = ds.features[split.unlabeled_idx], ds.labels[split.unlabeled_idx]
    X_t, y_t = ds.features[split.test_idx], ds.labels[split.test_idx]
    if X_t.shape[0] == 0:
        raise ConfigError("test pool is empty; increase test_fraction or n_samples")

    dims = (ds.dim, *cfg.hidden_dims_tuple(), ds.n_classes)
    try:
        net = init_net(dims, cfg.activation, seed=init_seed, scheme=cfg.init_scheme)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    opt = make_optimizer(net, cfg.learning_rate, cfg.momentum)
    rng = np.random.default_rng(train_seed)

    # metrics pools: unlabeled train pool for diagnostics (falling back to the
    # labeled pool in fully-labeled runs), held-out pool for test error
    X_m, y_m = (X_u, y_u) if X_u.shape[0] else (X_l, y_l)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.echo").write_text(cfg.to_text())

    n_l, n_u = X_l.shape[0], X_u.shape[0]
    b_l = min(n_l, cfg.labeled_batch_size)
    b_u = min(n_u, cfg.unlabeled_batch_size)
    steps = math.ceil(n_u / b_u) if n_u else math.ceil(n_l / b_l)
    need_prime = objective_cfg.alpha > 0.0 or objective_cfg.distill_augmented
    source = ConsistencySource(cfg.consistency_source)

    history: list[RunMetrics] = []
    with open(out_dir / "metrics.csv", "w") as m_file, open(
        out_dir / "histogram.csv", "w"
    ) as h_file:
        _write_row(m_file, METRICS_COLUMNS)
        _write_row(h_file, HISTOGRAM_COLUMNS)

        def record(epoch: int, j_s: float, j_c: float, j_d: float, total: float) -> None:
            m_bar, top_m = avg_sparsity_and_topm(net, X_m, y_m)
            row = RunMetrics(
                epoch=epoch,
                j_s=j_s,
                j_c=j_c,
                j_d=j_d,
                total=total,
                test_error=test_error(net, X_t, y_t),
                p_bar_1=avg_dominant_probability(net, X_m),
                m_bar=m_bar,
                top_m_acc=top_m,
                histogram=prediction_histogram(net, X_m),
            )
            history.append(row)
            _write_row(
                m_file,
                (
                    row.epoch,
                    row.j_s,
                    row.j_c,
                    row.j_d,
                    row.total,
                    row.test_error,
                    row.p_bar_1,
                    row.m_bar,
                    row.top_m_acc,
                ),
            )
            _write_row(h_file, (row.epoch, *(int(c) for c in row.histogram)))

        record(0, 0.0, 0.0, 0.0, 0.0)

        for epoch in range(1, cfg.epochs + 1):
            perm_u = rng.permutation(n_u) if n_u else None
            perm_l = rng.permutation(n_l)
            l_pos = 0
            sums = np.zeros(4)
            for step in range(steps):
                if l_pos + b_l > n_l:
                    perm_l = rng.permutation(n_l)
                    l_pos = 0
                idx_l = perm_l[l_pos : l_pos + b_l]
                l_pos += b_l
                batch_l = (X_l[idx_l], y_l[idx_l])
                Xb_u = X_u[perm_u[step * b_u : (step + 1) * b_u]] if n_u else None
                Xb_p = None
                if Xb_u is not None and Xb_u.shape[0] and need_prime:
                    if source == ConsistencySource.VAT:
                        Xb_p = Xb_u + batch_vat_perturbation(Xb_u, net, objective_cfg, rng)
                    else:
                        Xb_p = augment(Xb_u, cfg.augment_kind, cfg.augment_magnitude, rng)
                breakdown, grads = total_objective(
                    batch_l, (Xb_u, Xb_p), strategy, objective_cfg, net
                )
                if not math.isfinite(breakdown.total):
                    raise RuntimeError(
                        f"non-finite objective at epoch {epoch}, step {step}: "
                        f"{breakdown}"
                    )
                sgd_step(net, grads, opt)
                sums += (breakdown.j_s, breakdown.j_c, breakdown.j_d, breakdown.total)
            means = sums / steps
            record(epoch, *(float(v) for v in means))

    net.save(out_dir / "checkpoint.bin")
    return history, net


@dataclass(frozen=True)
class SweepRow:
    """Aggregated results of one strategy across seeds."""

    strategy: str
    n_seeds: int
    test_error_mean: float
    test_error_std: float
    p_bar_1_mean: float
    m_bar_mean: float


def run_sweep(
    cfg: ExperimentConfig, strategies: list[str], seeds: list[int]
) -> list[SweepRow]:
    """Run |strategies| x |seeds| experiments and aggregate per strategy.

    Each run writes into ``<out_dir>/<strategy>_seed<seed>/``; the summary
    goes to ``<out_dir>/sweep.csv`` (final test error mean +- population
    std, plus converged diagnostics averaged over the last 20 epochs) and an
    aligned table to ``<out_dir>/table.txt``.
    """
    if not strategies or not seeds:
        raise ConfigError("sweep needs at least one strategy and one seed")
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for strategy in strategies:
        finals, converged_p, converged_m = [], [], []
        for seed in seeds:
            sub = replace(
                cfg,
                strategy=strategy,
                seed=seed,
                out_dir=str(out_dir / f"{strategy}_seed{seed}"),
            )
            history, _ = run_experiment(sub)
            trained = history[1:]
            tail = trained[-CONVERGED_WINDOW:]
            finals.append(history[-1].test_error)
            converged_p.append(float(np.mean([r.p_bar_1 for r in tail])))
            converged_m.append(float(np.mean([r.m_bar for r in tail])))
        rows.append(
            SweepRow(
                strategy=strategy,
                n_seeds=len(seeds),
                test_error_mean=float(np.mean(finals)),
                test_error_std=float(np.std(finals)),
                p_bar_1_mean=float(np.mean(converged_p)),
                m_bar_mean=float(np.mean(converged_m)),
            )
        )
    with open(out_dir / "sweep.csv", "w") as handle:
        _write_row(
            handle,
            (
                "strategy",
                "n_seeds",
                "test_error_mean",
                "test_error_std",
                "p_bar_1_mean",
                "m_bar_mean",
            ),
        )
        for row in rows:
            _write_row(
                handle,
                (
                    row.strategy,
                    row.n_seeds,
                    row.test_error_mean,
                    row.test_error_std,
                    row.p_bar_1_mean,
                    row.m_bar_mean,
                ),
            )
    table = format_sweep_table(rows)
    (out_dir / "table.txt").write_text(table + "\n")
    return rows


def format_sweep_table(rows: list[SweepRow]) -> str:
    """Aligned text table of sweep results."""
    header = ("strategy", "seeds", "test_error", "p_bar_1", "m_bar")
    body = [
        (
            row.strategy,
            str(row.n_seeds),
            f"{row.test_error_mean:.4f} +- {row.test_error_std:.4f}",
            f"{row.p_bar_1_mean:.4f}",
            f"{row.m_bar_mean:.4f}",
        )
        for row in rows
    ]
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(header))))
    return "\n".join(lines)
