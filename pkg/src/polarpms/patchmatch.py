"""PatchMatch depth/normal estimation.

Each reference view is estimated with sequential sweeps that cycle through
row-major, reverse-row-major, column-major and reverse-column-major order. At
every pixel seven hypotheses (current, propagated from the scan predecessor,
random and perturbed variants) are scored and the cheapest one is kept.

Estimation runs in two phases. Phase 1 has no geometric term because no other
depth maps exist yet, and by default it is purely photometric; once every view
finished phase 1 the maps are exchanged and phase 2 repeats the sweeps with the
full cost.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _kernels as K
from .costs import CostConfig, PackedViews
from .geometry import CameraView, Hypothesis
from .polar_image import DepthNormalMap, PolarFrame

__all__ = [
    "EngineConfig",
    "ROW",
    "REVERSE_ROW",
    "COLUMN",
    "REVERSE_COLUMN",
    "ViewProblem",
    "estimate_all",
    "estimate_view",
    "generate_hypotheses",
    "initialize",
    "select_source_views",
    "source_view_scores",
]

logger = logging.getLogger(__name__)

ROW, REVERSE_ROW, COLUMN, REVERSE_COLUMN = 0, 1, 2, 3
SCAN_ORDERS = (ROW, REVERSE_ROW, COLUMN, REVERSE_COLUMN)
HYPOTHESIS_NAMES = ("current", "propagated", "random_depth", "random_normal", "random_both", "perturbed_depth", "perturbed_normal")


@dataclass(frozen=True)
class EngineConfig:
    """Sweep schedule and sampling parameters.

    ``iterations`` sweeps are run per phase; the depth and normal perturbation
    ranges shrink by ``decay`` after every sweep and restart each phase.
    ``hypotheses`` toggles the six non-incumbent candidates (index 0, the
    incumbent, is always kept).

    ``phase1_cost`` picks the phase-1 objective: ``"photometric"`` scores with
    the photometric term alone, ``"full"`` keeps the polarimetric and
    depth-normal terms and only drops the geometric one.
    """

    iterations: int = 4
    depth_range: tuple = (2.0, 6.0)
    eps_depth: float = 0.25
    theta_normal: float = math.pi / 6
    decay: float = 0.5
    seed: int = 0
    num_sources: int = 4
    geometric_phase: bool = True
    hypotheses: tuple = (True,) * K.N_HYP
    phase1_cost: str = "photometric"

    def __post_init__(self):
        d_min, d_max = self.depth_range
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < d_min < d_max:
            raise ValueError("depth range must satisfy 0 < d_min < d_max")
        if not 0 <= self.eps_depth < 1:
            raise ValueError("eps_depth must lie in [0, 1)")
        if not 0 <= self.theta_normal < math.pi / 2:
            raise ValueError("theta_normal must lie in [0, pi/2)")
        if self.num_sources < 1:
            raise ValueError("num_sources must be >= 1")
        if len(self.hypotheses) != K.N_HYP:
            raise ValueError(f"hypotheses needs {K.N_HYP} flags")
        if self.phase1_cost not in ("photometric", "full"):
            raise ValueError(f"phase1_cost must be 'photometric' or 'full', got {self.phase1_cost!r}")

    def replace(self, **kw) -> "EngineConfig":
        return replace(self, **kw)

    def phase_cost(self, cost: CostConfig, phase: int) -> CostConfig:
        """The cost configuration actually optimised in ``phase``."""
        if phase == 1 and self.phase1_cost == "photometric":
            return cost.baseline()
        return cost

    def perturbation(self, iteration: int) -> tuple[float, float]:
        f = self.decay**iteration
        return self.eps_depth * f, self.theta_normal * f


# -- source views ------------------------------------------------------------------

BETA_STAR = math.radians(15.0)
SIGMA_BETA = math.radians(10.0)


def source_view_scores(ref: CameraView, views, depth_range=(2.0, 6.0), grid: int = 20) -> np.ndarray:
    """Triangulation score of every view against ``ref`` (``-inf`` for ``ref``).

    Score is a Gaussian in the angle between optical axes, peaked at 15 deg,
    times the fraction of a ``grid`` x ``grid`` lattice of reference pixels at
    mid-range depth that lands inside the candidate image.
    """
    mid = 0.5 * (depth_range[0] + depth_range[1])
    us = np.linspace(0, ref.width - 1, grid)
    vs = np.linspace(0, ref.height - 1, grid)
    uu, vv = np.meshgrid(us, vs)
    pts_cam = mid * np.stack([(uu - ref.cx) / ref.fx, (vv - ref.cy) / ref.fy, np.ones_like(uu)], axis=-1)
    pts = ref.camera_to_world(pts_cam.reshape(-1, 3))
    scores = np.empty(len(views))
    for i, v in enumerate(views):
        if v.view_id == ref.view_id:
            scores[i] = -np.inf
            continue
        cosb = float(np.clip(ref.optical_axis @ v.optical_axis, -1.0, 1.0))
        beta = math.acos(cosb)
        Xc = v.world_to_camera(pts)
        z = Xc[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = v.fx * Xc[:, 0] / z + v.cx
            w = v.fy * Xc[:, 1] / z + v.cy
        inside = (z > 0) & (u >= 0) & (u <= v.width - 1) & (w >= 0) & (w <= v.height - 1)
        overlap = float(np.mean(inside))
        scores[i] = math.exp(-((beta - BETA_STAR) ** 2) / (2 * SIGMA_BETA**2)) * overlap
    return scores


def select_source_views(ref: CameraView, views, k: int = 4, depth_range=(2.0, 6.0)) -> list[CameraView]:
    """The ``k`` best-scoring other views, best first (ties keep input order)."""
    if len(views) < 2:
        raise ValueError("need at least two views")
    scores = source_view_scores(ref, views, depth_range)
    order = sorted((i for i in range(len(views)) if views[i].view_id != ref.view_id), key=lambda i: -scores[i])
    return [views[i] for i in order[:k]]


# -- initialisation and hypotheses -----------------------------------------------------


def initialize(view: CameraView, frame: PolarFrame | None, cfg: EngineConfig) -> DepthNormalMap:
    """Random camera-facing hypotheses, reproducible from ``(cfg.seed, view_id)``.

    Costs are left at zero; the engine scores the map before sweeping.
    """
    h, w = view.shape
    if frame is not None:
        frame.check_view(view)
    depth = np.empty((h, w))
    normal = np.empty((h, w, 3))
    K.init_map(view.view_id, cfg.seed, view.fx, view.fy, view.cx, view.cy, *cfg.depth_range, depth, normal)
    return DepthNormalMap(depth, normal, np.zeros((h, w)), np.ones((h, w), dtype=bool))


def generate_hypotheses(
    pixel, current: DepthNormalMap, view: CameraView, order: int, cfg: EngineConfig, iteration: int = 0, phase: int = 1
) -> list[Hypothesis]:
    """The seven candidates the engine would draw at ``pixel`` for this sweep."""
    u, v = int(pixel[0]), int(pixel[1])
    eps_d, theta_n = cfg.perturbation(iteration)
    key = np.uint64(K.stream_key(cfg.seed, view.view_id, phase, iteration, v * view.width + u))
    out = np.empty((K.N_HYP, 4))
    K.generate_hypotheses(
        u, v, order, current.depth, current.normal, view.fx, view.fy, view.cx, view.cy,
        cfg.depth_range[0], cfg.depth_range[1], eps_d, theta_n, key, out,
    )
    return [Hypothesis(row[0], row[1:].copy()) for row in out]


# -- per-view problem --------------------------------------------------------------


class ViewProblem:
    """Everything needed to sweep one reference view."""

    def __init__(
        self,
        packed: PackedViews,
        ref_index: int,
        engine: EngineConfig,
        cost: CostConfig,
        sources: list[int] | None = None,
    ):
        self.packed = packed
        self.r = ref_index
        self.view = packed.views[ref_index]
        self.engine = engine
        self.cost = cost
        if sources is None:
            chosen = select_source_views(self.view, packed.views, engine.num_sources, engine.depth_range)
            ids = [v.view_id for v in packed.views]
            sources = [ids.index(v.view_id) for v in chosen]
        self.srcs = np.asarray(sources, dtype=np.int64)
        self.rel_R, self.rel_t = packed.relative(ref_index, self.srcs)
        self.geo_depth, self.geo_valid = packed.empty_geo()
        self.enabled = np.asarray(engine.hypotheses, dtype=np.bool_)

    def set_source_maps(self, maps: list[DepthNormalMap]) -> None:
        for i, m in enumerate(maps):
            self.geo_depth[i] = m.depth
            self.geo_valid[i] = m.valid

    def _args(self, phase: int):
        p = self.packed
        return (
            p.intr, p.gray, p.dop, p.c2p, p.s2p, p.aop[self.r],
            self.geo_depth, self.geo_valid, self.srcs, self.rel_R, self.rel_t,
            self.engine.phase_cost(self.cost, phase).to_params(phase == 2),
        )

    def score(self, dmap: DepthNormalMap, phase: int) -> None:
        """Overwrite ``dmap.cost`` with the phase-``phase`` cost of every pixel."""
        K.score_map(self.r, *self._args(phase), dmap.depth, dmap.normal, dmap.valid, dmap.cost)

    def sweep(self, dmap: DepthNormalMap, order: int, phase: int, iteration: int) -> DepthNormalMap:
        eps_d, theta_n = self.engine.perturbation(iteration)
        d_min, d_max = self.engine.depth_range
        K.sweep(
            self.r, self.view.view_id, order, phase, iteration, self.engine.seed, d_min, d_max,
            eps_d, theta_n, self.enabled, *self._args(phase),
            dmap.depth, dmap.normal, dmap.valid, dmap.cost,
        )
        return dmap

    def run_phase(self, dmap: DepthNormalMap, phase: int, callback: Callable | None = None) -> DepthNormalMap:
        self.score(dmap, phase)
        for it in range(self.engine.iterations):
            order = SCAN_ORDERS[it % 4]
            self.sweep(dmap, order, phase, it)
            logger.info("view=%d phase=%d iter=%d mean_cost=%.6f", self.view.view_id, phase, it, float(np.mean(dmap.cost)))
            if callback is not None:
                callback(self.view.view_id, phase, it, dmap)
        return dmap


def estimate_view(
    ref_index: int,
    views: list[CameraView],
    frames: list[PolarFrame],
    engine: EngineConfig | None = None,
    cost: CostConfig | None = None,
    source_maps: list[DepthNormalMap] | None = None,
    init: DepthNormalMap | None = None,
    callback: Callable | None = None,
    packed: PackedViews | None = None,
) -> DepthNormalMap:
    """Estimate one view.

    Without ``source_maps`` this runs phase 1 from a random initialisation (or
    ``init``). With ``source_maps`` (one per view, phase-1 results) it runs
    phase 2 starting from ``init``, which defaults to this view's entry in
    ``source_maps``.
    """
    engine = engine or EngineConfig()
    cost = cost or CostConfig()
    packed = packed or PackedViews(views, frames)
    problem = ViewProblem(packed, ref_index, engine, cost)
    if source_maps is None:
        dmap = init.copy() if init is not None else initialize(views[ref_index], frames[ref_index], engine)
        return problem.run_phase(dmap, 1, callback)
    problem.set_source_maps(source_maps)
    dmap = (init if init is not None else source_maps[ref_index]).copy()
    return problem.run_phase(dmap, 2, callback)


def estimate_all(
    views: list[CameraView],
    frames: list[PolarFrame],
    engine: EngineConfig | None = None,
    cost: CostConfig | None = None,
    threads: int = 1,
    callback: Callable | None = None,
) -> list[DepthNormalMap]:
    """Two-phase estimation of every view. Views run concurrently on up to
    ``threads`` workers; results do not depend on the thread count."""
    engine = engine or EngineConfig()
    cost = cost or CostConfig()
    packed = PackedViews(views, frames)
    n = len(views)

    def run(fn, items):
        if threads <= 1:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))

    phase1 = run(lambda i: estimate_view(i, views, frames, engine, cost, callback=callback, packed=packed), range(n))
    if not engine.geometric_phase:
        return phase1
    return run(
        lambda i: estimate_view(i, views, frames, engine, cost, source_maps=phase1, callback=callback, packed=packed),
        range(n),
    )
