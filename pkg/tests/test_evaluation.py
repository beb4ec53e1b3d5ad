import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarpms.evaluation import (
    AblationRow,
    EmptyInputError,
    cloud_accuracy,
    cloud_completeness,
    coverage,
    nearest_distances,
    pixel_error_curves,
    write_ablation_csv,
    write_curves_csv,
)
from polarpms.fusion import OrientedPointCloud
from polarpms.polar_image import DepthNormalMap


def flat_map(depth, h=4, w=6, valid=True):
    n = np.zeros((h, w, 3))
    n[..., 2] = -1.0
    return DepthNormalMap(np.full((h, w), float(depth)), n, np.zeros((h, w)), np.full((h, w), valid))


def brute_nearest(q, r):
    # plain left-to-right sum of squares (builtin sum() compensates since 3.12)
    out = np.empty(len(q))
    for i, (x, y, z) in enumerate(q.tolist()):
        out[i] = min(math.sqrt((x - a) * (x - a) + (y - b) * (y - b) + (z - c) * (z - c)) for a, b, c in r.tolist())
    return out


class TestErrorCurves:
    def test_identical_maps(self):
        gt = flat_map(3.0)
        c = pixel_error_curves([gt.copy()], [gt], [0.01, 0.5, 2.0], [0.1, 1.0, 45.0])
        assert np.array_equal(c.depth_fraction, [1, 1, 1])
        assert np.array_equal(c.normal_fraction, [1, 1, 1])

    def test_all_invalid(self):
        c = pixel_error_curves([flat_map(3.0, valid=False)], [flat_map(3.0)])
        assert np.all(c.depth_fraction == 0) and np.all(c.normal_fraction == 0)

    def test_half_offset_by_two(self):
        gt = flat_map(3.0)
        est = gt.copy()
        est.depth[:2] += 2.0
        c = pixel_error_curves([est], [gt], [1.0, 3.0], [1.0, 3.0])
        assert np.array_equal(c.depth_fraction, [0.5, 1.0])

    def test_invisible_pixels_ignored(self):
        gt = flat_map(3.0)
        gt.valid[:, :3] = False
        est = gt.copy()
        est.valid[:] = True
        est.depth[:, :3] = 100.0
        c = pixel_error_curves([est], [gt], [0.1], [0.1])
        assert c.depth_fraction[0] == 1.0

    def test_normal_error_degrees(self):
        gt = flat_map(3.0)
        est = gt.copy()
        a = math.radians(10.0)
        est.normal[:] = [math.sin(a), 0.0, -math.cos(a)]
        c = pixel_error_curves([est], [gt], [1.0, 1.0], [9.99, 10.01])
        assert np.array_equal(c.normal_fraction, [0.0, 1.0])

    def test_pools_all_views(self):
        gt = [flat_map(3.0), flat_map(3.0, h=2, w=2)]
        est = [g.copy() for g in gt]
        est[1].depth += 1.0
        c = pixel_error_curves(est, gt, [0.5], [1.0])
        assert c.depth_fraction[0] == pytest.approx(24 / 28)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            pixel_error_curves([flat_map(3.0)], [flat_map(3.0, h=5)])
        with pytest.raises(ValueError):
            pixel_error_curves([flat_map(3.0)], [])

    @given(st.integers(0, 2**32 - 1))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        gt = flat_map(3.0, h=8, w=8)
        est = gt.copy()
        est.depth += rng.normal(scale=0.3, size=est.depth.shape)
        est.valid = rng.random(est.valid.shape) > 0.2
        n = est.normal + rng.normal(scale=0.3, size=est.normal.shape)
        est.normal = n / np.linalg.norm(n, axis=2, keepdims=True)
        c = pixel_error_curves([est], [gt])
        assert np.all(np.diff(c.depth_fraction) >= 0) and np.all(np.diff(c.normal_fraction) >= 0)
        assert c.depth_fraction[-1] <= est.valid.mean()

    def test_csv(self, tmp_path):
        c = pixel_error_curves([flat_map(3.0)], [flat_map(3.0)], [0.0, 1.0], [0.0, 1.0])
        write_curves_csv(c, tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["threshold", "depth_fraction", "normal_fraction"]
        assert [float(x) for x in rows[2]] == [1.0, 1.0, 1.0]

    def test_csv_separate_grids(self, tmp_path):
        c = pixel_error_curves([flat_map(3.0)], [flat_map(3.0)])
        write_curves_csv(c, tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0][-1] == "normal_threshold" and len(rows) == 52
        assert float(rows[-1][0]) == 0.5 and float(rows[-1][-1]) == 50.0


class TestCloudMetrics:
    def test_identical(self):
        pts = np.random.default_rng(0).normal(size=(50, 3))
        assert cloud_accuracy(pts, pts) == 0.0 and cloud_completeness(pts, pts) == 0.0

    def test_single_shift(self):
        a = np.array([[1.0, 2.0, 3.0]])
        b = a + [0.3, 0.0, 0.0]
        assert cloud_accuracy(b, a) == pytest.approx(0.3, abs=1e-15)
        assert cloud_completeness(a, b) == pytest.approx(0.3, abs=1e-15)

    def test_accepts_cloud(self):
        c = OrientedPointCloud(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), np.zeros((1, 3)), np.ones(1))
        assert cloud_accuracy(c, [[0.0, 0.0, 2.0]]) == 2.0

    def test_empty_is_an_error(self):
        with pytest.raises(EmptyInputError):
            cloud_accuracy(np.zeros((0, 3)), np.zeros((3, 3)))
        with pytest.raises(EmptyInputError):
            cloud_completeness(np.zeros((3, 3)), OrientedPointCloud())

    def test_kdtree_matches_brute_force(self):
        rng = np.random.default_rng(11)
        q, r = rng.uniform(-1, 1, (500, 3)), rng.uniform(-1, 1, (500, 3))
        assert np.array_equal(nearest_distances(q, r), brute_nearest(q, r))

    def test_coverage(self):
        gt = np.array([[0.0, 0, 0], [1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
        est = np.array([[0.0, 0.05, 0], [2.0, 0.2, 0]])
        assert coverage(gt, est, 0.1) == 0.25
        assert coverage(gt, est, 0.2) == 0.5
        assert coverage(gt, np.zeros((0, 3)), 0.1) == 0.0


class TestAblationCsv:
    def test_format(self, tmp_path):
        rows = [AblationRow("neither", 0.1, 20.0, 10, 0.05, 0.2, 1.0), AblationRow("both", 0.05, 9.0, 12, 0.04, 0.1, 1.0)]
        write_ablation_csv(rows, tmp_path / "sub" / "a.csv")
        out = list(csv.reader(open(tmp_path / "sub" / "a.csv")))
        assert out[0] == ["config", "mean_depth_err", "mean_normal_err_deg", "num_points", "accuracy", "completeness"]
        assert out[2] == ["both", "0.05", "9.0", "12", "0.04", "0.1"]
