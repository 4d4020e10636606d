"""Data unit tests: generators, CSV round trips, splits, augmentation."""

import numpy as np
import pytest

from adsharp.data import (
    AugmentKind,
    Dataset,
    augment,
    circle_centers,
    load_csv,
    make_blobs,
    make_two_moons,
    save_csv,
    split_semi,
)
from adsharp.errors import ConfigError
from adsharp.net import init_net, make_optimizer, sgd_step
from adsharp.objective import batch_supervised_loss


def test_two_moons_counts_and_labels():
    ds = make_two_moons(1206, noise_std=0.1, seed=0)
    assert ds.n == 1206 and ds.dim == 2 and ds.n_classes == 2
    assert int(np.sum(ds.labels == 0)) == 603
    assert int(np.sum(ds.labels == 1)) == 603


def test_two_moons_noiseless_points_lie_on_the_arcs():
    ds = make_two_moons(400, noise_std=0.0, seed=1)
    X, y = ds.features, ds.labels
    outer = X[y == 0]
    inner = X[y == 1]
    np.testing.assert_allclose(np.sum(outer**2, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(
        (1.0 - inner[:, 0]) ** 2 + (0.5 - inner[:, 1]) ** 2, 1.0, atol=1e-12
    )


def test_two_moons_needs_nonlinear_boundary():
    """A least-squares linear probe stays below 95% while a small MLP fits
    the interleaved arcs almost perfectly."""
    ds = make_two_moons(400, noise_std=0.1, seed=7)
    X, y = ds.features, ds.labels
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    Y = np.zeros((X.shape[0], 2))
    Y[np.arange(X.shape[0]), y] = 1.0
    W, *_ = np.linalg.lstsq(A, Y, rcond=None)
    linear_acc = float(((A @ W).argmax(axis=1) == y).mean())
    assert linear_acc < 0.95

    net = init_net((2, 16, 16, 2), "tanh", seed=3)
    opt = make_optimizer(net, 0.05, 0.9)
    for _ in range(300):
        _, gZ = batch_supervised_loss(net.forward(X), Y)
        sgd_step(net, net.backward(gZ / X.shape[0]), opt)
    mlp_acc = float((net.forward(X, cache=False).argmax(axis=1) == y).mean())
    assert mlp_acc > 0.98


def test_circle_centers_geometry():
    centers = circle_centers(10, radius=6.0)
    assert centers.shape == (10, 2)
    np.testing.assert_allclose(np.linalg.norm(centers, axis=1), 6.0, atol=1e-12)
    np.testing.assert_allclose(centers[0], [6.0, 0.0], atol=1e-12)
    dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=2)
    assert np.min(dists[~np.eye(10, dtype=bool)]) > 1.0


def test_blobs_counts_and_remainder_distribution():
    ds = make_blobs(103, circle_centers(10, 6.0), spread=0.5, seed=0)
    counts = np.bincount(ds.labels, minlength=10)
    # 103 = 10*10 + 3: the three extras go to the earliest classes
    np.testing.assert_array_equal(counts, [11, 11, 11, 10, 10, 10, 10, 10, 10, 10])


def test_blobs_tight_spread_recovers_centers():
    centers = circle_centers(5, radius=6.0)
    ds = make_blobs(200, centers, spread=1e-9, seed=2)
    np.testing.assert_allclose(ds.features, centers[ds.labels], atol=1e-6)


def test_blobs_well_separated_nearest_center_accuracy():
    centers = circle_centers(10, radius=6.0)
    ds = make_blobs(500, centers, spread=0.5, seed=3)
    d = np.linalg.norm(ds.features[:, None, :] - centers[None, :, :], axis=2)
    acc = float((d.argmin(axis=1) == ds.labels).mean())
    assert acc >= 0.99


def test_csv_round_trip_is_exact(tmp_path):
    ds = make_two_moons(50, noise_std=0.1, seed=5)
    path = tmp_path / "moons.csv"
    save_csv(ds, path)
    back = load_csv(path, n_classes=2)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_load_csv_reports_line_numbers(tmp_path):
    path = tmp_path / "bad.csv"

    path.write_text("label,x0,x1\n0,0.5,0.5\n")
    with pytest.raises(ValueError, match="line 1"):
        load_csv(path, n_classes=2)  # header row is not an integer label

    path.write_text("0,0.5,0.5\n1,oops,0.5\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(path, n_classes=2)

    path.write_text("0,0.5,0.5\n\n1,0.1,0.2\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(path, n_classes=2)  # interior blank line

    path.write_text("0,0.5,0.5\n1,0.1\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(path, n_classes=2)  # ragged row

    path.write_text("0,0.5,0.5\n5,0.1,0.2\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(path, n_classes=2)  # label out of range

    path.write_text("0,0.5,0.5\n1,inf,0.2\n")
    with pytest.raises(ValueError, match="line 2"):
        load_csv(path, n_classes=2)  # non-finite feature


def test_load_csv_allows_trailing_newlines(tmp_path):
    path = tmp_path / "ok.csv"
    path.write_text("0,0.5,0.25\n1,-1.0,2.0\n\n")
    ds = load_csv(path, n_classes=2)
    assert ds.n == 2


def test_split_semi_partition_properties():
    ds = make_two_moons(1206, noise_std=0.1, seed=0)
    for seed in range(5):
        split = split_semi(ds, labels_per_class=3, test_fraction=200 / 1206, seed=seed)
        assert split.test_idx.size == 200
        assert split.labeled_idx.size == 6
        assert split.unlabeled_idx.size == 1000
        all_idx = np.concatenate([split.labeled_idx, split.unlabeled_idx, split.test_idx])
        assert np.array_equal(np.sort(all_idx), np.arange(1206))
        labels = ds.labels[split.labeled_idx]
        np.testing.assert_array_equal(np.bincount(labels, minlength=2), [3, 3])


def test_split_semi_is_deterministic_per_seed():
    ds = make_two_moons(300, seed=1)
    a = split_semi(ds, 3, 0.2, seed=9)
    b = split_semi(ds, 3, 0.2, seed=9)
    np.testing.assert_array_equal(a.labeled_idx, b.labeled_idx)
    np.testing.assert_array_equal(a.test_idx, b.test_idx)


def test_split_semi_rejects_infeasible_requests():
    ds = make_blobs(40, circle_centers(4, 6.0), seed=0)
    with pytest.raises(ConfigError):
        split_semi(ds, labels_per_class=20, test_fraction=0.5, seed=0)
    with pytest.raises(ConfigError):
        split_semi(ds, labels_per_class=0, test_fraction=0.2, seed=0)
    with pytest.raises(ConfigError):
        split_semi(ds, labels_per_class=3, test_fraction=1.0, seed=0)


def test_augment_zero_magnitude_is_identity_copy():
    X = np.random.default_rng(0).normal(size=(4, 3))
    for kind in AugmentKind:
        out = augment(X, kind, 0.0, np.random.default_rng(1))
        np.testing.assert_array_equal(out, X)
        assert out is not X


def test_augment_jitter_noise_scale():
    rng = np.random.default_rng(2)
    X = np.zeros((2000, 4))
    out = augment(X, "gaussian_jitter", 0.3, rng)
    noise = out - X
    # per-entry variance magnitude^2 -> squared norm concentrates at D*m^2
    assert float(np.mean(np.sum(noise**2, axis=1))) == pytest.approx(4 * 0.09, rel=0.1)
    assert abs(float(np.mean(noise))) < 0.01


def test_augment_feature_shift_is_shared_unit_direction():
    X = np.random.default_rng(3).normal(size=(6, 5))
    out = augment(X, AugmentKind.FEATURE_SHIFT, 0.25, np.random.default_rng(4))
    delta = out - X
    np.testing.assert_allclose(delta, np.tile(delta[0], (6, 1)), atol=1e-15)
    assert np.linalg.norm(delta[0]) == pytest.approx(0.25, abs=1e-12)


def test_augment_is_deterministic_given_rng_state():
    X = np.random.default_rng(5).normal(size=(3, 2))
    a = augment(X, "gaussian_jitter", 0.1, np.random.default_rng(7))
    b = augment(X, "gaussian_jitter", 0.1, np.random.default_rng(7))
    np.testing.assert_array_equal(a, b)


def test_augment_validation():
    X = np.zeros((2, 2))
    with pytest.raises(ValueError):
        augment(X, "gaussian_jitter", -0.1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        augment(X, "warp", 0.1, np.random.default_rng(0))


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 2]), n_classes=2)
    with pytest.raises(ValueError):
        Dataset(np.full((2, 2), np.nan), np.array([0, 1]), n_classes=2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), np.array([0, 1]), n_classes=1)
