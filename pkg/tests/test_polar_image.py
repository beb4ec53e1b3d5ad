import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from polarpms.polar_image import (
    DepthNormalMap,
    PfmFormatError,
    PolarFrame,
    aop_dop_from_polarizer_stack,
    load_dataset,
    load_maps,
    luminance,
    read_pfm,
    save_dataset,
    save_maps,
    write_pfm,
)

from conftest import make_view


class TestPolarizerStack:
    def test_pure_zero_degree(self):
        assert aop_dop_from_polarizer_stack(1.0, 0.5, 0.0, 0.5) == (0.0, 1.0)

    def test_pure_45_degree(self):
        phi, rho = aop_dop_from_polarizer_stack(0.5, 1.0, 0.5, 0.0)
        assert phi == math.pi / 4 and rho == 1.0

    @pytest.mark.parametrize("c", [1e-3, 0.7, 200.0])
    def test_unpolarized(self, c):
        assert aop_dop_from_polarizer_stack(c, c, c, c)[1] == 0.0

    def test_dark_pixels(self):
        phi, rho = aop_dop_from_polarizer_stack(1e-8, 0.0, 0.0, 0.0)
        assert (phi, rho) == (0.0, 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            aop_dop_from_polarizer_stack(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)), np.zeros((2, 2)))

    @given(
        hnp.arrays(np.float64, (4, 5, 5), elements=st.floats(0.0, 1000.0)),
        st.sampled_from([0.5, 2.0, 4.0, 0.25]),
    )
    def test_ranges_and_scale_invariance(self, stack, k):
        phi, rho = aop_dop_from_polarizer_stack(*stack)
        assert np.all((phi >= 0) & (phi < math.pi))
        assert np.all((rho >= 0) & (rho <= 1))
        # powers of two keep every intermediate exact
        phi2, rho2 = aop_dop_from_polarizer_stack(*(k * stack))
        live = (stack.sum(axis=0) / 2 >= 1e-6) & (k * stack.sum(axis=0) / 2 >= 1e-6)
        assert np.array_equal(phi[live], phi2[live])
        assert np.array_equal(rho[live], rho2[live])


class TestPolarFrame:
    def test_validates_ranges(self):
        rgb = np.zeros((2, 2, 3))
        with pytest.raises(ValueError, match="AoP"):
            PolarFrame(rgb, np.full((2, 2), math.pi), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="DoP"):
            PolarFrame(rgb, np.zeros((2, 2)), np.full((2, 2), 1.5))
        with pytest.raises(ValueError, match="shapes"):
            PolarFrame(rgb, np.zeros((2, 3)), np.zeros((2, 2)))

    def test_luminance(self):
        assert luminance(np.array([100.0, 50.0, 10.0])) == pytest.approx(0.299 * 100 + 0.587 * 50 + 0.114 * 10)

    def test_check_view(self):
        f = PolarFrame(np.zeros((48, 64, 3)), np.zeros((48, 64)), np.zeros((48, 64)))
        f.check_view(make_view())
        with pytest.raises(ValueError):
            f.check_view(make_view(width=32))


class TestDepthNormalMap:
    def test_masked_does_not_touch_original(self):
        m = DepthNormalMap(np.ones((2, 2)), np.zeros((2, 2, 3)), np.zeros((2, 2)), np.ones((2, 2), bool))
        k = m.masked(np.array([[True, False], [False, True]]))
        assert m.valid.all() and k.valid.sum() == 2

    def test_shape_check(self):
        with pytest.raises(ValueError):
            DepthNormalMap(np.ones((2, 2)), np.zeros((2, 3, 3)), np.zeros((2, 2)), np.ones((2, 2), bool))


class TestPfm:
    def test_single_zero(self, tmp_path):
        write_pfm(tmp_path / "a.pfm", np.zeros((1, 1)))
        out = read_pfm(tmp_path / "a.pfm")
        assert out.shape == (1, 1) and out[0, 0] == 0.0 and not np.signbit(out[0, 0])

    @given(hnp.arrays(np.float32, hnp.array_shapes(min_dims=2, max_dims=2, max_side=9)))
    def test_round_trip_bit_exact(self, tmp_path_factory, a):
        p = tmp_path_factory.mktemp("pfm") / "a.pfm"
        write_pfm(p, a)
        assert read_pfm(p).tobytes() == a.tobytes()

    def test_random_64_and_color(self, tmp_path):
        rng = np.random.default_rng(0)
        for shape in [(64, 64), (64, 64, 3)]:
            a = rng.normal(size=shape).astype(np.float32)
            write_pfm(tmp_path / "a.pfm", a)
            assert read_pfm(tmp_path / "a.pfm").tobytes() == a.tobytes()

    def test_big_endian_input(self, tmp_path):
        a = np.arange(6, dtype=np.float32).reshape(2, 3)
        (tmp_path / "b.pfm").write_bytes(b"Pf\n3 2\n1.0\n" + np.flipud(a).astype(">f4").tobytes())
        assert np.array_equal(read_pfm(tmp_path / "b.pfm"), a)

    @pytest.mark.parametrize(
        "blob, offset",
        [
            (b"P5\n1 1\n-1.0\n" + b"\0" * 4, 0),
            (b"Pf\nx 1\n-1.0\n" + b"\0" * 4, 3),
            (b"Pf\n2 2\n-1.0\n" + b"\0" * 4, 16),
            (b"Pf\n1 1\n0\n" + b"\0" * 4, 7),
        ],
    )
    def test_malformed_reports_offset(self, tmp_path, blob, offset):
        p = tmp_path / "bad.pfm"
        p.write_bytes(blob)
        with pytest.raises(PfmFormatError) as e:
            read_pfm(p)
        assert e.value.offset == offset


class TestDirectories:
    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        views = [make_view(view_id=i, width=8, height=6) for i in range(2)]
        frames = [
            PolarFrame(rng.integers(0, 256, (6, 8, 3)).astype(float), rng.uniform(0, 3.1, (6, 8)), rng.uniform(0, 1, (6, 8)))
            for _ in views
        ]
        save_dataset(tmp_path, views, frames)
        v2, f2 = load_dataset(tmp_path)
        assert [v.view_id for v in v2] == [0, 1]
        for a, b in zip(frames, f2):
            assert np.array_equal(a.rgb, b.rgb)
            assert np.array_equal(a.aop.astype(np.float32), b.aop)

    def test_missing_file_named(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="cameras.txt"):
            load_dataset(tmp_path)

    def test_maps_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        views = [make_view(width=8, height=6)]
        n = rng.normal(size=(6, 8, 3))
        n /= np.linalg.norm(n, axis=2, keepdims=True)
        valid = rng.random((6, 8)) > 0.3
        m = DepthNormalMap(rng.uniform(2, 6, (6, 8)).astype(np.float32).astype(float), n.astype(np.float32).astype(float),
                           rng.random((6, 8)).astype(np.float32).astype(float), valid)
        save_maps(tmp_path, views, [m])
        (b,) = load_maps(tmp_path, views)
        assert np.array_equal(b.valid, valid)
        assert np.array_equal(b.depth[valid], m.depth[valid])
        assert np.array_equal(b.normal, m.normal)
