"""Datasets, semi-supervised splits, CSV I/O, and input augmentation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError

__all__ = [
    "Dataset",
    "SemiSplit",
    "AugmentKind",
    "make_two_moons",
    "make_blobs",
    "circle_centers",
    "load_csv",
    "save_csv",
    "split_semi",
    "augment",
]


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (N, D) with integer labels in [0, n_classes)."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    name: str = ""

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValueError("features must be a nonempty (N, D) array")
        if labels.shape != (feats.shape[0],):
            raise ValueError("labels must be a (N,) array matching features")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SemiSplit:
    """Index sets of a semi-supervised split (disjoint, covering the dataset)."""

    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray
    test_idx: np.ndarray


class AugmentKind(str, Enum):
    GAUSSIAN_JITTER = "gaussian_jitter"
    FEATURE_SHIFT = "feature_shift"


def make_two_moons(n: int, noise_std: float = 0.1, seed: int = 0) -> Dataset:
    """Two interleaved half-circles in the plane with Gaussian noise.

    Class 0 is the upper arc, class 1 the lower shifted arc; with
    ``noise_std=0`` the points lie exactly on the arcs.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (math.isfinite(noise_std) and noise_std >= 0.0):
        raise ValueError("noise_std must be a finite real >= 0")
    n0 = n // 2
    n1 = n - n0
    t0 = np.linspace(0.0, np.pi, n0)
    t1 = np.linspace(0.0, np.pi, n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    feats = np.vstack([outer, inner])
    rng = np.random.default_rng(seed)
    feats = feats + rng.normal(0.0, noise_std, size=feats.shape) if noise_std > 0 else feats
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(feats, labels, n_classes=2, name="two_moons")


def circle_centers(k: int, radius: float = 6.0) -> np.ndarray:
    """k well-separated cluster centers evenly spaced on a circle."""
    if k < 2:
        raise ValueError("k must be >= 2")
    angles = 2.0 * np.pi * np.arange(k) / k
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def make_blobs(
    n: int, centers: np.ndarray, spread: float = 0.5, seed: int = 0
) -> Dataset:
    """Isotropic Gaussian clusters, one class per center.

    Counts are split as evenly as possible across classes (earlier classes
    take the remainder); ``spread=0`` places every point exactly on its
    center.
    """
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim != 2 or centers.shape[0] < 2:
        raise ValueError("centers must be a (K, D) array with K >= 2")
    if not (math.isfinite(spread) and spread >= 0.0):
        raise ValueError("spread must be a finite real >= 0")
    k = centers.shape[0]
    if n < k:
        raise ValueError("n must be >= the number of centers")
    counts = [n // k + (1 if i < n % k else 0) for i in range(k)]
    rng = np.random.default_rng(seed)
    feats, labels = [], []
    for cls, count in enumerate(counts):
        noise = rng.normal(0.0, spread, size=(count, centers.shape[1])) if spread > 0 else 0.0
        feats.append(centers[cls] + noise)
        labels.append(np.full(count, cls, dtype=np.int64))
    return Dataset(np.vstack(feats), np.concatenate(labels), n_classes=k, name="blobs")


def save_csv(ds: Dataset, path: str | Path) -> None:
    """Write label-first delimited rows: label,x_1,...,x_D per line.

    Floats use repr formatting, so a read-back reproduces them exactly.
    """
    lines = []
    for label, row in zip(ds.labels, ds.features):
        lines.append(",".join([str(int(label))] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_csv(path: str | Path, n_classes: int) -> Dataset:
    """Read a label-first delimited dataset, validating every line.

    Any malformed line (non-integer label, non-numeric or non-finite
    feature, inconsistent width, interior blank) raises a ValueError naming
    the 1-based line number.
    """
    path = Path(path)
    raw_lines = path.read_text().split("\n")
    while raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    labels, rows = [], []
    width = None
    for lineno, line in enumerate(raw_lines, start=1):
        if line.strip() == "":
            raise ValueError(f"{path}: line {lineno}: blank line")
        parts = line.split(",")
        if len(parts) < 2:
            raise ValueError(f"{path}: line {lineno}: expected label plus features")
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise ValueError(
                f"{path}: line {lineno}: expected {width} fields, found {len(parts)}"
            )
        try:
            label = int(parts[0])
        except ValueError:
            raise ValueError(
                f"{path}: line {lineno}: label {parts[0]!r} is not an integer"
            ) from None
        if not (0 <= label < n_classes):
            raise ValueError(
                f"{path}: line {lineno}: label {label} outside [0, {n_classes})"
            )
        try:
            feats = [float(p) for p in parts[1:]]
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: non-numeric feature value") from None
        if not all(math.isfinite(v) for v in feats):
            raise ValueError(f"{path}: line {lineno}: non-finite feature value")
        labels.append(label)
        rows.append(feats)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int64),
        n_classes=n_classes,
        name=path.stem,
    )


def split_semi(
    ds: Dataset, labels_per_class: int, test_fraction: float, seed: int = 0
) -> SemiSplit:
    """Stratified semi-supervised split.

    A random permutation first reserves round(test_fraction * N) examples
    for testing; from the remainder each class contributes exactly
    ``labels_per_class`` labeled examples and the rest become the unlabeled
    pool.  Classes with too few training examples raise a ConfigError.
    """
    if int(labels_per_class) != labels_per_class or labels_per_class < 1:
        raise ConfigError("labels_per_class must be an integer >= 1")
    if not (0.0 <= test_fraction < 1.0):
        raise ConfigError("test_fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    n_test = int(round(test_fraction * ds.n))
    test_idx = perm[:n_test]
    train_idx = perm[n_test:]
    train_labels = ds.labels[train_idx]
    labeled_parts = []
    labeled_mask = np.zeros(train_idx.size, dtype=bool)
    for cls in range(ds.n_classes):
        positions = np.flatnonzero(train_labels == cls)
        if positions.size < labels_per_class:
            raise ConfigError(
                f"class {cls} has only {positions.size} training examples; "
                f"need {labels_per_class} labeled"
            )
        chosen = positions[:labels_per_class]
        labeled_mask[chosen] = True
        labeled_parts.append(train_idx[chosen])
    labeled_idx = np.concatenate(labeled_parts)
    unlabeled_idx = train_idx[~labeled_mask]
    return SemiSplit(labeled_idx, unlabeled_idx, test_idx)


def augment(
    x: np.ndarray,
    kind: AugmentKind | str,
    magnitude: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Stochastic input perturbation.

    GAUSSIAN_JITTER adds independent N(0, magnitude^2) noise per entry;
    FEATURE_SHIFT adds magnitude times one random unit direction, shared
    across the batch.  ``magnitude=0`` is the exact identity.
    """
    kind = AugmentKind(kind)
    if not (math.isfinite(magnitude) and magnitude >= 0.0):
        raise ValueError("magnitude must be a finite real >= 0")
    x = np.asarray(x, dtype=np.float64)
    if magnitude == 0.0:
        return x.copy()
    if kind == AugmentKind.GAUSSIAN_JITTER:
        return x + rng.normal(0.0, magnitude, size=x.shape)
    direction = rng.normal(size=x.shape[-1])
    norm = np.linalg.norm(direction)
    if norm > 0.0:
        direction /= norm
    return x + magnitude * direction
