import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarpms.geometry import (
    BehindCameraError,
    CameraView,
    DegeneratePlaneError,
    Hypothesis,
    UndefinedAzimuthError,
    backproject,
    image_azimuth,
    pixel_ray,
    plane_homography,
    project,
    read_cameras,
    write_cameras,
)

from conftest import facing_normal, make_view, random_rotation, small_rotation


def ray_plane_oracle(ref, src, q, n, X0):
    """Intersect the reference ray through ``q`` with the plane and project it
    into ``src`` one point at a time."""
    r = np.array([(q[0] - ref.cx) / ref.fx, (q[1] - ref.cy) / ref.fy, 1.0])
    s = (n @ X0) / (n @ r)
    Xw = ref.camera_to_world(s * r)
    u, v, _ = project(src, Xw)
    return np.array([u, v])


def random_instance(rng):
    R_ref = random_rotation(rng)
    ref = make_view(R_ref, rng.normal(size=3), view_id=0)
    R_src = small_rotation(rng, 0.3) @ R_ref
    c_ref = ref.center
    c_src = c_ref + rng.normal(scale=0.5, size=3)
    src = make_view(R_src, -R_src @ c_src, view_id=1)
    pixel = (rng.uniform(5, ref.width - 6), rng.uniform(5, ref.height - 6))
    d = rng.uniform(2.0, 6.0)
    ray = pixel_ray(ref, pixel)
    n = facing_normal(rng, ray)
    # keep the plane away from grazing
    while abs(n @ ray) < 0.3:
        n = facing_normal(rng, ray)
    return ref, src, pixel, Hypothesis(d, n)


class TestCameraView:
    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(ValueError, match="orthonormal"):
            make_view(R=np.diag([1.0, 1.0, 1.1]))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError, match="det"):
            make_view(R=np.diag([1.0, 1.0, -1.0]))

    def test_rejects_bad_intrinsics(self):
        with pytest.raises(ValueError):
            CameraView(0.0, 1.0, 1.0, 1.0, np.eye(3), np.zeros(3), 4, 4)
        with pytest.raises(ValueError):
            CameraView(1.0, 1.0, 5.0, 1.0, np.eye(3), np.zeros(3), 4, 4)

    def test_center_and_axis(self):
        rng = np.random.default_rng(1)
        R = random_rotation(rng)
        c = rng.normal(size=3)
        v = make_view(R, -R @ c)
        assert np.allclose(v.center, c, atol=1e-12)
        assert np.allclose(v.optical_axis, R[2], atol=1e-12)


class TestBackprojectProject:
    def test_principal_ray(self):
        v = make_view()
        assert np.array_equal(backproject(v, (v.cx, v.cy), 2.0), [0.0, 0.0, 2.0])

    def test_unit_offset(self):
        v = make_view(width=300)
        assert np.allclose(backproject(v, (v.cx + v.fx, v.cy), 1.0), [1.0, 0.0, 1.0], atol=1e-15)

    def test_project_examples(self):
        v = make_view(width=300)
        assert project(v, [0.0, 0.0, 1.0]) == (v.cx, v.cy, 1.0)
        u, w, z = project(v, [1.0, 0.0, 1.0])
        assert (u, w, z) == (v.cx + v.fx, v.cy, 1.0)

    def test_errors(self):
        v = make_view()
        with pytest.raises(ValueError):
            backproject(v, (1.0, 1.0), 0.0)
        with pytest.raises(BehindCameraError):
            project(v, [0.0, 0.0, -1.0])

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        R = random_rotation(rng)
        v = make_view(R, rng.normal(size=3))
        px = (rng.uniform(0, v.width - 1), rng.uniform(0, v.height - 1))
        d = rng.uniform(0.1, 50.0)
        Xw = v.camera_to_world(backproject(v, px, d))
        u, w, z = project(v, Xw)
        assert math.hypot(u - px[0], w - px[1]) <= 1e-9
        assert z == pytest.approx(d, rel=1e-12)


class TestPlaneHomography:
    def test_identity_pose(self):
        v = make_view()
        H = plane_homography(v, v, (20.0, 20.0), Hypothesis(3.0, np.array([0.1, -0.2, -1.0]) / math.sqrt(1.05)))
        for q in [(0.0, 0.0), (10.5, 30.25), (63.0, 47.0)]:
            p = H @ np.array([q[0], q[1], 1.0])
            assert np.allclose(p[:2] / p[2], q, atol=1e-9)

    def test_fronto_parallel_shift(self):
        ref = make_view()
        t = 0.3
        src = make_view(t=np.array([-t, 0.0, 0.0]), view_id=1)
        d = 2.5
        H = plane_homography(ref, src, (30.0, 20.0), Hypothesis(d, np.array([0.0, 0.0, -1.0])))
        for q in [(0.0, 0.0), (30.0, 20.0), (55.0, 7.0)]:
            p = H @ np.array([q[0], q[1], 1.0])
            p = p[:2] / p[2]
            assert p[0] - q[0] == pytest.approx(-ref.fx * t / d, abs=1e-9)
            assert p[1] == pytest.approx(q[1], abs=1e-9)
            # independent per-point projection
            assert np.allclose(p, ray_plane_oracle(ref, src, q, np.array([0, 0, -1.0]), np.array([0, 0, d])), atol=1e-9)

    @given(st.integers(0, 2**32 - 1))
    def test_matches_ray_plane_oracle(self, seed):
        rng = np.random.default_rng(seed)
        ref, src, pixel, hyp = random_instance(rng)
        H = plane_homography(ref, src, pixel, hyp)
        X0 = backproject(ref, pixel, hyp.depth)
        for _ in range(20):
            q = (pixel[0] + rng.uniform(-5, 5), pixel[1] + rng.uniform(-5, 5))
            try:
                expected = ray_plane_oracle(ref, src, q, hyp.normal, X0)
            except BehindCameraError:
                continue
            p = H @ np.array([q[0], q[1], 1.0])
            assert np.linalg.norm(p[:2] / p[2] - expected) <= 1e-6

    def test_plane_through_reference_centre(self):
        v = make_view()
        px = (v.cx + 10, v.cy)
        ray = pixel_ray(v, px)
        # normal orthogonal to the pixel ray: the plane contains the centre
        n = np.cross(ray, [0.0, 1.0, 0.0])
        n /= np.linalg.norm(n)
        with pytest.raises(DegeneratePlaneError):
            plane_homography(v, make_view(t=np.array([0.1, 0, 0]), view_id=1), px, Hypothesis(2.0, n))


class TestImageAzimuth:
    def test_axes(self):
        v = make_view()
        assert image_azimuth(v, np.array([1.0, 0.0, 0.0])) == 0.0
        assert image_azimuth(v, np.array([0.0, 1.0, 0.0])) == math.pi / 2

    def test_range_is_half_open(self):
        v = make_view()
        a = image_azimuth(v, np.array([1.0, -1e-300, 0.0]))
        assert 0.0 <= a < 2 * math.pi

    def test_undefined(self):
        with pytest.raises(UndefinedAzimuthError):
            image_azimuth(make_view(), np.array([0.0, 0.0, 1.0]))

    @given(st.integers(0, 2**32 - 1))
    def test_matches_rotate_then_atan2(self, seed):
        rng = np.random.default_rng(seed)
        R = random_rotation(rng)
        v = make_view(R)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        nc = [R[i, 0] * n[0] + R[i, 1] * n[1] + R[i, 2] * n[2] for i in range(2)]
        expected = math.atan2(nc[1], nc[0])
        if expected < 0:
            expected += 2 * math.pi
        if expected >= 2 * math.pi:
            expected = 0.0
        assert image_azimuth(v, n) == expected

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
    def test_scale_invariant(self, seed, scale):
        rng = np.random.default_rng(seed)
        v = make_view(random_rotation(rng))
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        m = scale * n
        m /= np.linalg.norm(m)
        assert image_azimuth(v, m) == pytest.approx(image_azimuth(v, n), abs=1e-12)

    def test_array_input_matches_scalar(self):
        rng = np.random.default_rng(3)
        v = make_view(random_rotation(rng))
        n = rng.normal(size=(50, 3))
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        arr = image_azimuth(v, n)
        assert np.array_equal(arr, [image_azimuth(v, x) for x in n])


class TestHypothesis:
    def test_invariants(self):
        v = make_view()
        px = (10.0, 10.0)
        ray = pixel_ray(v, px)
        assert Hypothesis(3.0, -ray).is_valid(v, px, 2.0, 6.0)
        assert not Hypothesis(3.0, ray).is_valid(v, px)
        assert not Hypothesis(7.0, -ray).is_valid(v, px, 2.0, 6.0)
        assert not Hypothesis(3.0, -2 * ray).is_valid(v, px)


class TestCameraFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        views = [make_view(random_rotation(rng), rng.normal(size=3), view_id=i) for i in range(3)]
        write_cameras(tmp_path / "cams.txt", views)
        back = read_cameras(tmp_path / "cams.txt")
        for a, b in zip(views, back):
            assert a.view_id == b.view_id and a.shape == b.shape
            assert np.array_equal(a.rotation, b.rotation)
            assert np.array_equal(a.translation, b.translation)
            assert (a.fx, a.fy, a.cx, a.cy) == (b.fx, b.fy, b.cx, b.cy)

    def test_bad_record_names_line(self, tmp_path):
        p = tmp_path / "cams.txt"
        p.write_text("# header\n0 1 2 3\n")
        with pytest.raises(ValueError, match=r"cams.txt:2"):
            read_cameras(p)
