import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polarpms import synth
from polarpms.costs import CostConfig, PackedViews
from polarpms.geometry import backproject, pixel_ray
from polarpms.patchmatch import (
    COLUMN,
    REVERSE_COLUMN,
    REVERSE_ROW,
    ROW,
    EngineConfig,
    ViewProblem,
    estimate_all,
    estimate_view,
    generate_hypotheses,
    initialize,
    select_source_views,
    source_view_scores,
)
from polarpms.geometry import look_at, CameraView

from conftest import make_view


def ring_views(n, radius=4.0, elevation=20.0, size=32):
    spec = synth.SceneSpec(n_cameras=n, ring_arc=360.0, ring_radius=radius, elevation=elevation, width=size, height=size)
    return synth.make_views(spec)


def plane_map(view, n, d0):
    X0 = backproject(view, (view.cx, view.cy), d0)
    h, w = view.shape
    vv, uu = np.mgrid[0:h, 0:w]
    rays = np.stack([(uu - view.cx) / view.fx, (vv - view.cy) / view.fy, np.ones((h, w))], axis=-1)
    m = initialize(view, None, EngineConfig())
    m.depth[:] = (n @ X0) / (rays @ n)
    m.normal[:] = n
    return m


@pytest.fixture(scope="module")
def plane_scene():
    spec = synth.SceneSpec(primitives=[synth.Plane(normal=(0.0, -1.0, 0.3), extent=1.5)])
    return synth.render(spec)


@pytest.fixture(scope="module")
def small_scene():
    spec = synth.default_scene(width=32, height=32, fov=45.0)
    return synth.render(spec)


class TestEngineConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"iterations": 0},
            {"depth_range": (3.0, 2.0)},
            {"depth_range": (0.0, 2.0)},
            {"eps_depth": 1.0},
            {"theta_normal": math.pi / 2},
            {"num_sources": 0},
            {"hypotheses": (True,) * 3},
            {"phase1_cost": "none"},
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            EngineConfig(**kw)

    def test_decay(self):
        cfg = EngineConfig(eps_depth=0.2, theta_normal=0.4, decay=0.5)
        assert cfg.perturbation(0) == (0.2, 0.4)
        assert cfg.perturbation(2) == (0.05, 0.1)

    def test_phase_cost(self):
        cost = CostConfig()
        assert EngineConfig().phase_cost(cost, 1) == cost.baseline()
        assert EngineConfig().phase_cost(cost, 2) == cost
        assert EngineConfig(phase1_cost="full").phase_cost(cost, 1) == cost


class TestSourceSelection:
    def test_two_views(self):
        views = ring_views(2)
        assert [v.view_id for v in select_source_views(views[0], views)] == [1]

    def test_ring_prefers_neighbours(self):
        views = ring_views(8)
        s = source_view_scores(views[0], views)
        assert s[1] > s[4] and s[7] > s[4]
        top = [v.view_id for v in select_source_views(views[0], views, k=2)]
        assert set(top) == {1, 7}

    def test_duplicate_pose_ranks_below_15_degrees(self):
        ref = ring_views(2)[0]
        dup = CameraView(ref.fx, ref.fy, ref.cx, ref.cy, ref.rotation, ref.translation, ref.width, ref.height, 1)
        spec = synth.SceneSpec(n_cameras=2, ring_arc=15.0, width=32, height=32)
        ref15, nb = synth.make_views(spec)
        nb = CameraView(nb.fx, nb.fy, nb.cx, nb.cy, nb.rotation, nb.translation, nb.width, nb.height, 2)
        dup = CameraView(ref15.fx, ref15.fy, ref15.cx, ref15.cy, ref15.rotation, ref15.translation, ref15.width, ref15.height, 1)
        order = [v.view_id for v in select_source_views(ref15, [ref15, dup, nb])]
        assert order == [2, 1]

    def test_needs_two(self):
        v = make_view()
        with pytest.raises(ValueError):
            select_source_views(v, [v])


class TestInitialize:
    def test_deterministic(self):
        v = make_view()
        a = initialize(v, None, EngineConfig(seed=3))
        b = initialize(v, None, EngineConfig(seed=3))
        assert a.depth.tobytes() == b.depth.tobytes() and a.normal.tobytes() == b.normal.tobytes()
        c = initialize(v, None, EngineConfig(seed=4))
        assert not np.array_equal(a.depth, c.depth)

    def test_range_and_facing(self):
        v = make_view()
        cfg = EngineConfig(depth_range=(2.0, 6.0))
        m = initialize(v, None, cfg)
        assert np.all((m.depth >= 2.0) & (m.depth <= 6.0))
        assert np.allclose(np.linalg.norm(m.normal, axis=2), 1.0, atol=1e-12)
        for vv in range(0, v.height, 7):
            for uu in range(0, v.width, 7):
                assert m.normal[vv, uu] @ pixel_ray(v, (uu, vv)) < 0


class TestHypotheses:
    @given(st.integers(0, 2**31), st.sampled_from([ROW, REVERSE_ROW, COLUMN, REVERSE_COLUMN]), st.integers(0, 3))
    def test_seven_valid(self, seed, order, it):
        v = make_view()
        cfg = EngineConfig(seed=seed)
        m = initialize(v, None, cfg)
        px = (17, 11)
        hyps = generate_hypotheses(px, m, v, order, cfg, iteration=it)
        assert len(hyps) == 7
        for h in hyps:
            assert h.is_valid(v, px, *cfg.depth_range)
        assert hyps[0].depth == m.depth[11, 17] and np.array_equal(hyps[0].normal, m.normal[11, 17])

    @pytest.mark.parametrize("order, pred", [(ROW, (16, 11)), (REVERSE_ROW, (18, 11)), (COLUMN, (17, 10)), (REVERSE_COLUMN, (17, 12))])
    def test_propagation_matches_ray_plane(self, order, pred):
        v = make_view()
        cfg = EngineConfig()
        m = initialize(v, None, cfg)
        n = np.array([0.2, -0.3, -0.9])
        n /= np.linalg.norm(n)
        pu, pv = pred
        m.depth[pv, pu] = 3.7
        m.normal[pv, pu] = n
        X = backproject(v, pred, 3.7)
        r = np.array([(17 - v.cx) / v.fx, (11 - v.cy) / v.fy, 1.0])
        expected = (n @ X) / (n @ r)
        prop = generate_hypotheses((17, 11), m, v, order, cfg)[1]
        assert abs(prop.depth - expected) <= 1e-9
        assert np.array_equal(prop.normal, n)

    def test_border_propagation_is_current(self):
        v = make_view()
        cfg = EngineConfig()
        m = initialize(v, None, cfg)
        hyps = generate_hypotheses((0, 5), m, v, ROW, cfg)
        assert hyps[1].depth == hyps[0].depth and np.array_equal(hyps[1].normal, hyps[0].normal)

    def test_zero_perturbation(self):
        v = make_view()
        cfg = EngineConfig(eps_depth=0.0, theta_normal=0.0)
        m = initialize(v, None, cfg)
        hyps = generate_hypotheses((20, 20), m, v, ROW, cfg)
        assert hyps[5].depth == hyps[0].depth and np.allclose(hyps[5].normal, hyps[0].normal, atol=1e-15)
        assert hyps[6].depth == hyps[0].depth and np.allclose(hyps[6].normal, hyps[0].normal, atol=1e-15)


class TestSweep:
    def test_incumbent_only_is_noop(self, small_scene):
        views = [r.view for r in small_scene]
        frames = [r.frame for r in small_scene]
        cfg = EngineConfig(hypotheses=(True,) + (False,) * 6)
        prob = ViewProblem(PackedViews(views, frames), 0, cfg, CostConfig())
        m = initialize(views[0], frames[0], cfg)
        prob.score(m, 1)
        before = m.copy()
        for order in (ROW, REVERSE_ROW, COLUMN, REVERSE_COLUMN):
            prob.sweep(m, order, 1, 0)
        assert m.depth.tobytes() == before.depth.tobytes()
        assert m.normal.tobytes() == before.normal.tobytes()
        assert m.cost.tobytes() == before.cost.tobytes()

    def test_seeded_pixel_propagates_along_row(self, plane_scene):
        views = [r.view for r in plane_scene]
        frames = [r.frame for r in plane_scene]
        gt = synth.gt_maps(plane_scene)
        r = 2
        cfg = EngineConfig()
        prob = ViewProblem(PackedViews(views, frames), r, cfg, CostConfig())
        for row in (30, 48, 60):
            m = initialize(views[r], frames[r], cfg)
            cols = np.nonzero(plane_scene[r].mask[row])[0]
            u0 = cols[0] + 2
            m.depth[row, u0] = gt[r].depth[row, u0]
            m.normal[row, u0] = gt[r].normal[row, u0]
            prob.score(m, 1)
            prob.sweep(m, ROW, 1, 0)
            rest = cols[cols > u0]
            rel = np.abs(m.depth[row, rest] - gt[r].depth[row, rest]) / gt[r].depth[row, rest]
            assert np.mean(rel < 0.01) >= 0.9

    def test_cost_never_increases(self, small_scene):
        views = [r.view for r in small_scene]
        frames = [r.frame for r in small_scene]
        seen = {}

        def check(view_id, phase, it, m):
            key = (view_id, phase)
            if key in seen:
                assert np.all(m.cost <= seen[key])
            seen[key] = m.cost.copy()

        estimate_all(views, frames, EngineConfig(), CostConfig(), callback=check)
        assert len(seen) == 2 * len(views)


class TestEstimate:
    def test_same_seed_bit_identical(self, small_scene):
        views = [r.view for r in small_scene]
        frames = [r.frame for r in small_scene]
        a = estimate_view(0, views, frames, EngineConfig(seed=5))
        b = estimate_view(0, views, frames, EngineConfig(seed=5))
        assert a.depth.tobytes() == b.depth.tobytes() and a.normal.tobytes() == b.normal.tobytes()

    def test_threads_do_not_change_result(self, small_scene):
        views = [r.view for r in small_scene]
        frames = [r.frame for r in small_scene]
        a = estimate_all(views, frames, EngineConfig(seed=2), threads=1)
        b = estimate_all(views, frames, EngineConfig(seed=2), threads=3)
        for x, y in zip(a, b):
            assert x.depth.tobytes() == y.depth.tobytes()
            assert x.normal.tobytes() == y.normal.tobytes()
            assert x.cost.tobytes() == y.cost.tobytes()

    def test_progress_log(self, small_scene, caplog):
        views = [r.view for r in small_scene]
        frames = [r.frame for r in small_scene]
        with caplog.at_level("INFO", logger="polarpms.patchmatch"):
            estimate_view(1, views, frames, EngineConfig(iterations=1))
        assert any(rec.getMessage().startswith("view=1 phase=1 iter=0 mean_cost=") for rec in caplog.records)

    @pytest.mark.slow
    def test_textured_sphere_depth_accuracy(self):
        rendered = synth.render(synth.SceneSpec())
        views = [r.view for r in rendered]
        frames = [r.frame for r in rendered]
        gt = synth.gt_maps(rendered)
        maps = estimate_all(views, frames)
        rel = np.concatenate([(np.abs(m.depth - g.depth) / np.where(g.valid, g.depth, 1.0))[g.valid] for m, g in zip(maps, gt)])
        assert np.mean(rel < 0.01) >= 0.8
