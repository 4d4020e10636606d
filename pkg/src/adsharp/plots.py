"""Plot-ready exports: tidy CSVs plus rendered PNG figures.

Each exporter reads a run (or sweep) directory's artifacts and writes both a
delimited file and a matplotlib figure next to it, under ``<dir>/export/``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["export_curves", "export_histograms", "export_table"]

_CURVE_SERIES = ("j_s", "j_c", "j_d", "total", "test_error", "p_bar_1", "m_bar", "top_m_acc")


def _read_csv(path: Path) -> list[dict]:
    if not path.is_file():
        raise FileNotFoundError(f"missing {path}")
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def _out_dir(base: Path, out_dir: str | Path | None) -> Path:
    out = Path(out_dir) if out_dir is not None else base / "export"
    out.mkdir(parents=True, exist_ok=True)
    return out


def export_curves(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Tidy per-epoch series and a four-panel training-curve figure."""
    run_dir = Path(run_dir)
    rows = _read_csv(run_dir / "metrics.csv")
    out = _out_dir(run_dir, out_dir)
    epochs = [int(r["epoch"]) for r in rows]

    csv_path = out / "curves.csv"
    with open(csv_path, "w") as handle:
        handle.write("epoch,series,value\n")
        for row in rows:
            for series in _CURVE_SERIES:
                handle.write(f"{row['epoch']},{series},{row[series]}\n")

    fig, axes = plt.subplots(2, 2, figsize=(10, 7))
    for series in ("j_s", "j_c", "j_d", "total"):
        axes[0, 0].plot(epochs, [float(r[series]) for r in rows], label=series)
    axes[0, 0].set_title("objective terms")
    axes[0, 0].legend()
    axes[0, 1].plot(epochs, [float(r["test_error"]) for r in rows], color="tab:red")
    axes[0, 1].set_title("test error")
    axes[1, 0].plot(epochs, [float(r["p_bar_1"]) for r in rows], color="tab:blue")
    axes[1, 0].set_title("average dominant probability")
    axes[1, 1].plot(epochs, [float(r["m_bar"]) for r in rows], label="m_bar")
    axes[1, 1].plot(epochs, [float(r["top_m_acc"]) for r in rows], label="top_m_acc")
    axes[1, 1].set_title("sparsity and top-m accuracy")
    axes[1, 1].legend()
    for ax in axes.flat:
        ax.set_xlabel("epoch")
    fig.tight_layout()
    png_path = out / "curves.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def export_histograms(run_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Tidy histogram rows and bar charts for four snapshot epochs."""
    run_dir = Path(run_dir)
    rows = _read_csv(run_dir / "histogram.csv")
    out = _out_dir(run_dir, out_dir)

    csv_path = out / "histograms.csv"
    with open(csv_path, "w") as handle:
        handle.write("epoch,bin_lo,bin_hi,count\n")
        for row in rows:
            for b in range(10):
                handle.write(f"{row['epoch']},{b / 10:.1f},{(b + 1) / 10:.1f},{row[f'bin_{b}']}\n")

    picks = sorted({0, len(rows) // 3, (2 * len(rows)) // 3, len(rows) - 1})
    fig, axes = plt.subplots(1, len(picks), figsize=(4 * len(picks), 3.2), squeeze=False)
    centers = [b / 10 + 0.05 for b in range(10)]
    for ax, i in zip(axes[0], picks):
        counts = [int(rows[i][f"bin_{b}"]) for b in range(10)]
        ax.bar(centers, counts, width=0.09)
        ax.set_title(f"epoch {rows[i]['epoch']}")
        ax.set_xlabel("prediction value")
    axes[0][0].set_ylabel("count")
    fig.tight_layout()
    png_path = out / "histograms.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]


def export_table(sweep_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Copy the sweep summary into the export folder with a bar-chart figure."""
    sweep_dir = Path(sweep_dir)
    rows = _read_csv(sweep_dir / "sweep.csv")
    out = _out_dir(sweep_dir, out_dir)

    csv_path = out / "table.csv"
    with open(csv_path, "w") as handle:
        handle.write("strategy,n_seeds,test_error_mean,test_error_std,p_bar_1_mean,m_bar_mean\n")
        for row in rows:
            handle.write(
                ",".join(
                    row[k]
                    for k in (
                        "strategy",
                        "n_seeds",
                        "test_error_mean",
                        "test_error_std",
                        "p_bar_1_mean",
                        "m_bar_mean",
                    )
                )
                + "\n"
            )

    fig, ax = plt.subplots(figsize=(1.6 * max(4, len(rows)), 3.6))
    names = [r["strategy"] for r in rows]
    means = [float(r["test_error_mean"]) for r in rows]
    stds = [float(r["test_error_std"]) for r in rows]
    ax.bar(names, means, yerr=stds, capsize=4, color="tab:blue")
    ax.set_ylabel("test error")
    ax.set_title("final test error by strategy")
    fig.tight_layout()
    png_path = out / "table.png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return [csv_path, png_path]
