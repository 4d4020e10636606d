"""Experiment-runner tests: config parsing, artifacts, determinism, sweeps."""

import warnings
from dataclasses import replace

import numpy as np
import pytest

from adsharp.errors import ConfigError
from adsharp.runner import (
    CONVERGED_WINDOW,
    HISTOGRAM_COLUMNS,
    METRICS_COLUMNS,
    ExperimentConfig,
    format_sweep_table,
    parse_config,
    parse_config_text,
    run_experiment,
    run_sweep,
)

TINY = dict(n_samples=160, epochs=3, labels_per_class=3, test_fraction=0.2, seed=0)


def _tiny_cfg(out_dir, **kw):
    merged = {**TINY, **kw}
    return ExperimentConfig(out_dir=str(out_dir), **merged)


def test_config_text_round_trip():
    cfg = ExperimentConfig(out_dir="runs/x", alpha=0.25, hidden_dims="8,4", seed=7)
    assert parse_config_text(cfg.to_text()) == cfg


def test_parse_config_text_values_and_comments():
    cfg = parse_config_text(
        "# comment line\n"
        "strategy = sh\n"
        "epochs = 12\n"
        "alpha = 0.5\n"
        "distill_augmented = true\n"
        "\n"
        "hidden_dims = 4,4\n"
    )
    assert cfg.strategy == "sh"
    assert cfg.epochs == 12
    assert cfg.alpha == 0.5
    assert cfg.distill_augmented is True
    assert cfg.hidden_dims_tuple() == (4, 4)


def test_parse_config_text_rejects_unknown_and_duplicate_keys():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("epochs = 5\nnot_a_key = 1\n")
    with pytest.raises(ConfigError, match="line 3"):
        parse_config_text("epochs = 5\nalpha = 0.1\nepochs = 6\n")
    with pytest.raises(ConfigError, match="cannot parse 'twelve' as int"):
        parse_config_text("epochs = twelve\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("epochs\n")


def test_parse_config_text_overrides():
    cfg = parse_config_text("epochs = 5\n", overrides=("epochs=9", "strategy=pl"))
    assert cfg.epochs == 9 and cfg.strategy == "pl"
    with pytest.raises(ConfigError):
        parse_config_text("", overrides=("nonsense",))
    with pytest.raises(ConfigError):
        parse_config_text("", overrides=("bogus_key=1",))


def test_parse_config_missing_file(tmp_path):
    missing = tmp_path / "nope.cfg"
    with pytest.raises(ConfigError, match="nope.cfg"):
        parse_config(missing)


def test_invalid_configs_are_rejected(tmp_path):
    bad = [
        dict(epochs=0),
        dict(learning_rate=0.0),
        dict(momentum=1.0),
        dict(test_fraction=0.0),
        dict(strategy="nope"),
        dict(activation="sigmoid"),
        dict(unlabeled_batch_size=0),
        dict(dataset="imagenet"),
        dict(alpha=-1.0),
    ]
    for kw in bad:
        with pytest.raises(ConfigError):
            run_experiment(_tiny_cfg(tmp_path / "x", **kw))


def test_run_artifacts_and_history(tmp_path):
    out = tmp_path / "run"
    cfg = _tiny_cfg(out)
    history, net = run_experiment(cfg)
    assert (out / "config.echo").exists()
    assert (out / "metrics.csv").exists()
    assert (out / "histogram.csv").exists()
    assert (out / "checkpoint.bin").exists()

    assert len(history) == cfg.epochs + 1
    first = history[0]
    assert first.epoch == 0
    assert first.j_s == first.j_c == first.j_d == first.total == 0.0

    # per-epoch invariants
    n_unlabeled = 160 - round(0.2 * 160) - 2 * 3
    for rec in history:
        assert 0.0 <= rec.test_error <= 1.0
        assert 1.0 <= rec.m_bar <= 2.0
        assert rec.histogram.sum() == 2 * n_unlabeled
        assert rec.total == pytest.approx(
            rec.j_s + cfg.alpha * rec.j_c + cfg.beta * rec.j_d, abs=1e-12
        )

    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert len(lines) == cfg.epochs + 2
    hist_lines = (out / "histogram.csv").read_text().splitlines()
    assert hist_lines[0] == ",".join(HISTOGRAM_COLUMNS)

    echoed = parse_config(out / "config.echo")
    assert echoed == cfg


def test_rerun_is_byte_identical(tmp_path):
    cfg_a = _tiny_cfg(tmp_path / "a", epochs=4, alpha=0.5, seed=3)
    cfg_b = _tiny_cfg(tmp_path / "b", epochs=4, alpha=0.5, seed=3)
    run_experiment(cfg_a)
    run_experiment(cfg_b)
    for name in ("metrics.csv", "histogram.csv", "checkpoint.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_different_seeds_diverge(tmp_path):
    _, net_a = run_experiment(_tiny_cfg(tmp_path / "a", seed=0))
    _, net_b = run_experiment(_tiny_cfg(tmp_path / "b", seed=1))
    assert any(not np.array_equal(wa, wb) for wa, wb in zip(net_a.weights, net_b.weights))


def test_checkpoint_matches_returned_net(tmp_path):
    from adsharp.net import Net

    out = tmp_path / "run"
    _, net = run_experiment(_tiny_cfg(out))
    loaded = Net.load(out / "checkpoint.bin")
    for a, b in zip(loaded.weights, net.weights):
        np.testing.assert_array_equal(a, b)


def test_vat_source_runs(tmp_path):
    cfg = _tiny_cfg(tmp_path / "vat", alpha=1.0, consistency_source="vat", epsilon_vat=0.3)
    history, _ = run_experiment(cfg)
    assert len(history) == cfg.epochs + 1


def test_non_finite_objective_aborts_with_diagnostic(tmp_path):
    cfg = _tiny_cfg(
        tmp_path / "blow",
        epochs=60,
        activation="relu",
        learning_rate=1e8,
        momentum=0.95,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        with np.errstate(all="ignore"):
            with pytest.raises(RuntimeError, match="non-finite objective at epoch"):
                run_experiment(cfg)


def test_run_sweep_rows_and_files(tmp_path):
    out = tmp_path / "sweep"
    cfg = _tiny_cfg(out, epochs=3)
    rows = run_sweep(cfg, strategies=["ads", "none"], seeds=[0, 1])
    assert [r.strategy for r in rows] == ["ads", "none"]
    assert all(r.n_seeds == 2 for r in rows)
    assert (out / "sweep.csv").exists()
    assert (out / "table.txt").exists()
    for strategy in ("ads", "none"):
        for seed in (0, 1):
            assert (out / f"{strategy}_seed{seed}" / "metrics.csv").exists()

    table = format_sweep_table(rows)
    assert "ads" in table and "+-" in table


def test_single_run_sweep_matches_run_experiment(tmp_path):
    cfg = _tiny_cfg(tmp_path / "sw", epochs=3, seed=5)
    rows = run_sweep(cfg, strategies=["sh"], seeds=[5])
    history, _ = run_experiment(
        replace(cfg, strategy="sh", seed=5, out_dir=str(tmp_path / "solo"))
    )
    assert rows[0].test_error_mean == pytest.approx(history[-1].test_error, abs=1e-15)
    assert rows[0].test_error_std == 0.0
    tail = history[1:][-CONVERGED_WINDOW:]
    assert rows[0].p_bar_1_mean == pytest.approx(
        float(np.mean([r.p_bar_1 for r in tail])), abs=1e-15
    )


def test_run_sweep_rejects_empty_axes(tmp_path):
    cfg = _tiny_cfg(tmp_path / "s")
    with pytest.raises(ConfigError):
        run_sweep(cfg, strategies=[], seeds=[0])
    with pytest.raises(ConfigError):
        run_sweep(cfg, strategies=["ads"], seeds=[])
