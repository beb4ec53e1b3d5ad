"""Hypothesis costs: photometric, geometric, polarimetric and depth-normal
consistency, and their weighted sum.

The functions here are thin wrappers over the compiled kernels in
:mod:`polarpms._kernels`, which the PatchMatch engine calls directly, so the
numbers reported by these helpers are the numbers the engine optimises.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _kernels as K
from .geometry import CameraView, Hypothesis, relative_pose
from .polar_image import DepthNormalMap, PolarFrame

__all__ = [
    "CostConfig",
    "PackedViews",
    "PatchSample",
    "ambiguity_min_angle",
    "color_similarity",
    "combine_costs",
    "delta",
    "depth_normal_cost",
    "dop_weight",
    "extract_patch",
    "geometric_cost",
    "photometric_cost",
    "polarimetric_cost",
    "total_cost",
]


@dataclass(frozen=True)
class CostConfig:
    """Weights and constants of the hypothesis cost.

    Defaults are the synthetic-data setting; :meth:`real` gives the real-data
    weights. ``use_pol``/``use_dep`` remove a term from the computation
    entirely (as opposed to a zero weight), which is how the plain
    photometric+geometric engine is obtained.
    """

    tau_geo: float = 0.4
    tau_pol: float = 4.0
    tau_dep: float = 0.4
    psi_max: float = 3.0
    rho0: float = 0.005
    window_radius: int = 5
    sample_step: int = 1
    sigma_color: float = 0.2 * 255.0
    bilateral: bool = True
    eps_var: float = 1.0
    min_kept_fraction: float = 0.5
    delta: str = "sin"
    use_pol: bool = True
    use_dep: bool = True

    def __post_init__(self):
        if min(self.tau_geo, self.tau_pol, self.tau_dep) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.psi_max <= 0:
            raise ValueError("psi_max must be positive")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.window_radius < 1 or self.sample_step < 1:
            raise ValueError("window_radius and sample_step must be >= 1")
        if self.delta not in ("sin", "linear"):
            raise ValueError(f"delta must be 'sin' or 'linear', got {self.delta!r}")

    @classmethod
    def synthetic(cls, **kw) -> "CostConfig":
        return cls(**kw)

    @classmethod
    def real(cls, **kw) -> "CostConfig":
        kw.setdefault("tau_pol", 10.0)
        kw.setdefault("rho0", 1.0)
        return cls(**kw)

    def baseline(self) -> "CostConfig":
        """Photometric(+geometric) only, with the extra terms compiled out."""
        return replace(self, use_pol=False, use_dep=False)

    def replace(self, **kw) -> "CostConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_params(self, geometric: bool) -> np.ndarray:
        p = np.zeros(K.N_PARAMS)
        p[K.P_TAU_GEO] = self.tau_geo
        p[K.P_TAU_POL] = self.tau_pol
        p[K.P_TAU_DEP] = self.tau_dep
        p[K.P_PSI_MAX] = self.psi_max
        p[K.P_RHO0] = self.rho0
        p[K.P_RADIUS] = self.window_radius
        p[K.P_SIGMA_C] = self.sigma_color
        p[K.P_EPS_VAR] = self.eps_var
        p[K.P_DELTA_LINEAR] = 1.0 if self.delta == "linear" else 0.0
        p[K.P_BILATERAL] = 1.0 if self.bilateral else 0.0
        p[K.P_USE_POL] = 1.0 if self.use_pol else 0.0
        p[K.P_USE_DEP] = 1.0 if self.use_dep else 0.0
        p[K.P_GEO_ACTIVE] = 1.0 if geometric else 0.0
        p[K.P_MIN_KEEP] = self.min_kept_fraction
        p[K.P_STEP] = self.sample_step
        return p


# -- packing ---------------------------------------------------------------------


class PackedViews:
    """All views stacked into the array layout the kernels expect."""

    def __init__(self, views: list[CameraView], frames: list[PolarFrame]):
        if len(views) != len(frames):
            raise ValueError("need one frame per view")
        shapes = {v.shape for v in views}
        if len(shapes) != 1:
            raise ValueError(f"all views must share one image size, got {sorted(shapes)}")
        for v, f in zip(views, frames):
            f.check_view(v)
        self.views = list(views)
        self.intr = np.array([[v.fx, v.fy, v.cx, v.cy] for v in views])
        self.rot = np.stack([v.rotation for v in views])
        self.trans = np.stack([v.translation for v in views])
        self.gray = np.ascontiguousarray(np.stack([f.gray for f in frames]))
        self.aop = np.ascontiguousarray(np.stack([f.aop for f in frames]))
        self.dop = np.ascontiguousarray(np.stack([f.dop for f in frames]))
        self.c2p = np.cos(2.0 * self.aop)
        self.s2p = np.sin(2.0 * self.aop)

    @property
    def shape(self) -> tuple[int, int]:
        return self.gray.shape[1:]

    def relative(self, r: int, srcs) -> tuple[np.ndarray, np.ndarray]:
        rel = [relative_pose(self.views[r], self.views[m]) for m in srcs]
        if not rel:
            return np.zeros((0, 3, 3)), np.zeros((0, 3))
        return np.stack([a for a, _ in rel]), np.stack([b for _, b in rel])

    def empty_geo(self) -> tuple[np.ndarray, np.ndarray]:
        n, h, w = self.gray.shape
        return np.zeros((n, h, w)), np.zeros((n, h, w), dtype=bool)


def _evaluate(pixel, hyp, ref_view, ref_frame, sources, cfg, geometric, source_maps=None, current_map=None):
    views = [ref_view] + [s[0] for s in sources]
    frames = [ref_frame] + [s[1] for s in sources]
    packed = PackedViews(views, frames)
    srcs = np.arange(1, len(views), dtype=np.int64)
    rel_R, rel_t = packed.relative(0, srcs)
    geo_depth, geo_valid = packed.empty_geo()
    if source_maps is not None:
        for i, m in enumerate(source_maps, start=1):
            geo_depth[i] = m.depth
            geo_valid[i] = m.valid
    if current_map is None:
        cur_depth = np.zeros(packed.shape)
        cur_valid = np.zeros(packed.shape, dtype=bool)
    else:
        cur_depth, cur_valid = current_map.depth, current_map.valid
    params = cfg.to_params(geometric)
    du, dv, val, wt, H, ba, bb, bw, out = K._scratch(params)
    u, v = int(pixel[0]), int(pixel[1])
    n = K.fill_ref_patch(
        packed.gray[0], u, v, cfg.window_radius, cfg.sample_step, cfg.sigma_color, cfg.bilateral, du, dv, val, wt
    )
    nrm = hyp.normal
    K.hypothesis_terms(
        0, u, v, hyp.depth, nrm[0], nrm[1], nrm[2],
        packed.intr, packed.gray, packed.dop, packed.c2p, packed.s2p, packed.aop[0],
        geo_depth, geo_valid, srcs, rel_R, rel_t, cur_depth, cur_valid, params,
        du, dv, val, wt, n, H, ba, bb, bw, out,
    )
    return out.copy()


# -- photometric -----------------------------------------------------------------


@dataclass
class PatchSample:
    """Window samples: integer offsets ``(N, 2)`` as (du, dv), gray values and
    per-sample weights."""

    offsets: np.ndarray
    values: np.ndarray
    weights: np.ndarray


def extract_patch(gray, pixel, radius: int = 5, sigma_color: float = 0.2 * 255.0, bilateral: bool = True) -> PatchSample:
    gray = np.ascontiguousarray(gray, dtype=np.float64)
    size = (2 * radius + 1) ** 2
    du = np.empty(size, dtype=np.int64)
    dv = np.empty(size, dtype=np.int64)
    val = np.empty(size)
    wt = np.empty(size)
    n = K.fill_ref_patch(gray, int(pixel[0]), int(pixel[1]), radius, 1, sigma_color, bilateral, du, dv, val, wt)
    return PatchSample(np.stack([du[:n], dv[:n]], axis=1), val[:n].copy(), wt[:n].copy())


def color_similarity(ref_patch: PatchSample, src_patch: PatchSample, eps_var: float = 1.0) -> float:
    """Weighted normalised cross-correlation; 0 for (near-)constant patches.

    The weights of ``ref_patch`` are used for both patches.
    """
    a = np.ascontiguousarray(ref_patch.values, dtype=np.float64)
    b = np.ascontiguousarray(src_patch.values, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("patches must have equal sample counts")
    w = np.ascontiguousarray(ref_patch.weights, dtype=np.float64)
    return float(K.weighted_ncc(a, b, w, a.shape[0], eps_var))


def photometric_cost(pixel, hyp: Hypothesis, ref_view, ref_frame, sources, cfg: CostConfig | None = None) -> float:
    """Mean of ``1 - NCC`` over the source views; ``sources`` is a list of
    ``(CameraView, PolarFrame)``."""
    if not sources:
        raise ValueError("need at least one source view")
    cfg = cfg or CostConfig()
    out = _evaluate(pixel, hyp, ref_view, ref_frame, sources, cfg.replace(use_pol=False, use_dep=False), False)
    return float(out[0])


def geometric_cost(pixel, hyp: Hypothesis, ref_view, ref_frame, sources, cfg: CostConfig | None = None) -> float:
    """Mean robustified forward-backward cost; ``sources`` is a list of
    ``(CameraView, PolarFrame, DepthNormalMap)``."""
    if not sources:
        raise ValueError("need at least one source view")
    cfg = cfg or CostConfig()
    out = _evaluate(
        pixel, hyp, ref_view, ref_frame, [s[:2] for s in sources],
        cfg.replace(use_pol=False, use_dep=False), True, source_maps=[s[2] for s in sources],
    )
    return float(out[1])


def reprojection_error(ref_view: CameraView, src_view: CameraView, pixel, depth: float, src_map: DepthNormalMap, psi_max: float = math.inf) -> float:
    """Forward-backward pixel error of ``pixel`` at ``depth`` through ``src_view``."""
    R_rel, t_rel = relative_pose(ref_view, src_view)
    intr = np.array([[v.fx, v.fy, v.cx, v.cy] for v in (ref_view, src_view)])
    geo_depth = np.stack([np.zeros(src_map.shape), src_map.depth])
    geo_valid = np.stack([np.zeros(src_map.shape, dtype=bool), src_map.valid])
    return float(
        K.geometric_psi(intr, 0, 1, R_rel, t_rel, float(pixel[0]), float(pixel[1]), depth, geo_depth, geo_valid, psi_max)
    )


# -- polarimetric ----------------------------------------------------------------


def ambiguity_min_angle(alpha, phi):
    """Distance from ``alpha - phi`` to the nearest ambiguity offset, in ``[0, pi/4]``.

    ``alpha`` in ``[0, 2*pi)`` is wrapped to ``[-pi, pi)`` before the seven
    offsets ``-2pi .. pi`` are tried. Vectorised over numpy inputs.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    a = np.where(alpha >= math.pi, alpha - 2.0 * math.pi, alpha)
    offs = K.AMBIGUITY_OFFSETS.reshape((-1,) + (1,) * np.broadcast(a, phi).ndim)
    eta = np.min(np.abs((a - offs) - phi), axis=0)
    return float(eta) if eta.ndim == 0 else eta


def delta(eta, mode: str = "sin"):
    """Concave penalty on the ambiguity angle, mapping ``[0, pi/4]`` onto ``[0, 1]``."""
    e = np.asarray(eta, dtype=np.float64)
    if np.any(e < 0) or np.any(e > math.pi / 4 + 1e-12):
        raise ValueError("eta must lie in [0, pi/4]")
    if mode == "sin":
        out = np.sin(2.0 * e)
    elif mode == "linear":
        out = 4.0 * e / math.pi
    else:
        raise ValueError(f"unknown delta mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def dop_weight(rho, rho0: float = 0.005):
    """DoP confidence weight, rising quadratically to 1 at ``rho0``."""
    r = np.asarray(rho, dtype=np.float64)
    m = np.minimum(r, rho0) - rho0
    out = 1.0 - m * m / (rho0 * rho0)
    return float(out) if out.ndim == 0 else out


def polarimetric_cost(pixel, hyp: Hypothesis, ref_view, ref_frame, sources, cfg: CostConfig | None = None) -> float:
    """DoP-weighted mean of the AoP/azimuth penalty over reference and warped
    source pixels; 0 when no view carries polarization."""
    cfg = cfg or CostConfig()
    out = _evaluate(pixel, hyp, ref_view, ref_frame, sources, cfg.replace(use_pol=True, use_dep=False), False)
    return float(out[2])


# -- depth-normal ----------------------------------------------------------------


def depth_normal_cost(pixel, hyp: Hypothesis, view: CameraView, current: DepthNormalMap) -> float:
    """``1 - n . n_dep`` with ``n_dep`` the normal of the triangle through the
    pixel (at the hypothesis depth) and its right and lower neighbours (at their
    current depths). Zero where a neighbour is missing."""
    intr = np.array([[view.fx, view.fy, view.cx, view.cy]])
    n = hyp.normal
    return float(
        K.depth_normal_term(
            intr, 0, int(pixel[0]), int(pixel[1]), hyp.depth, n[0], n[1], n[2],
            np.ascontiguousarray(current.depth, dtype=np.float64), np.ascontiguousarray(current.valid),
        )
    )


# -- total -----------------------------------------------------------------------


def combine_costs(f_pho: float, f_geo: float, f_pol: float, f_dep: float, cfg: CostConfig, geometric: bool = True) -> float:
    tau_geo = cfg.tau_geo if geometric else 0.0
    total = f_pho + tau_geo * f_geo
    if cfg.use_pol:
        total += cfg.tau_pol * f_pol
    if cfg.use_dep:
        total += cfg.tau_dep * f_dep
    return total


def total_cost(
    pixel,
    hyp: Hypothesis,
    ref_view: CameraView,
    ref_frame: PolarFrame,
    sources,
    cfg: CostConfig | None = None,
    current: DepthNormalMap | None = None,
    geometric: bool = False,
) -> float:
    """Weighted sum of all terms.

    ``sources`` holds ``(view, frame)`` pairs, or ``(view, frame, map)`` triples
    when ``geometric`` is set (second estimation phase).
    """
    cfg = cfg or CostConfig()
    if geometric and any(len(s) < 3 for s in sources):
        raise ValueError("geometric phase needs a depth map for every source view")
    maps = [s[2] for s in sources] if geometric else None
    out = _evaluate(pixel, hyp, ref_view, ref_frame, [s[:2] for s in sources], cfg, geometric, maps, current)
    return float(out[4])
