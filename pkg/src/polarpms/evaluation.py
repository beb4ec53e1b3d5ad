"""Accuracy metrics for estimated maps and fused clouds.

The ablation at the bottom toggles the polarimetric and depth-normal terms
and tabulates both kinds of metric for each of the four combinations.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import synth
from .costs import CostConfig, PackedViews
from .fusion import FusionConfig, OrientedPointCloud, fuse, reliability_filter
from .patchmatch import EngineConfig, ViewProblem, initialize
from .polar_image import DepthNormalMap

__all__ = [
    "ABLATION_CONFIGS",
    "AblationRow",
    "ErrorCurves",
    "ablation_report",
    "cloud_accuracy",
    "cloud_completeness",
    "coverage",
    "depth_errors",
    "nearest_distances",
    "normal_errors_deg",
    "pixel_error_curves",
    "write_ablation_csv",
    "write_curves_csv",
]

logger = logging.getLogger(__name__)


class EmptyInputError(ValueError):
    """A metric was asked for on an empty point set."""


# -- per-pixel errors --------------------------------------------------------------


def _check_pair(est: DepthNormalMap, gt: DepthNormalMap, mask):
    if est.shape != gt.shape:
        raise ValueError(f"estimated map {est.shape} and ground truth {gt.shape} differ in size")
    mask = gt.valid if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != gt.shape:
        raise ValueError(f"mask {mask.shape} does not match map size {gt.shape}")
    return mask


def depth_errors(est: DepthNormalMap, gt: DepthNormalMap, mask=None) -> np.ndarray:
    """``|d_est - d_gt|`` over the visible pixels; ``inf`` where ``est`` is invalid."""
    mask = _check_pair(est, gt, mask)
    err = np.abs(est.depth - gt.depth)
    return np.where(est.valid, err, np.inf)[mask]


def normal_errors_deg(est: DepthNormalMap, gt: DepthNormalMap, mask=None) -> np.ndarray:
    """Angle between estimated and true normals in degrees; ``inf`` where invalid."""
    mask = _check_pair(est, gt, mask)
    cos = np.clip(np.einsum("...i,...i->...", est.normal, gt.normal), -1.0, 1.0)
    return np.where(est.valid, np.degrees(np.arccos(cos)), np.inf)[mask]


@dataclass
class ErrorCurves:
    """Fraction of visible pixels whose error is below each threshold."""

    depth_thresholds: np.ndarray
    depth_fraction: np.ndarray
    normal_thresholds: np.ndarray
    normal_fraction: np.ndarray


def _fractions(errors, thresholds):
    errors = np.sort(errors)
    if errors.size == 0:
        return np.zeros(len(thresholds))
    return np.searchsorted(errors, thresholds, side="left") / errors.size


def pixel_error_curves(
    est_maps: list[DepthNormalMap],
    gt_maps: list[DepthNormalMap],
    depth_thresholds=None,
    normal_thresholds=None,
    masks=None,
) -> ErrorCurves:
    """Cumulative error curves pooled over all pixels of all views.

    A pixel counts below threshold ``t`` when its error is strictly less than
    ``t``; invalid estimates never count. ``masks`` defaults to each ground
    truth map's ``valid`` flags.
    """
    if len(est_maps) != len(gt_maps):
        raise ValueError(f"got {len(est_maps)} estimated maps for {len(gt_maps)} ground-truth maps")
    masks = masks if masks is not None else [None] * len(gt_maps)
    d = np.concatenate([depth_errors(e, g, m) for e, g, m in zip(est_maps, gt_maps, masks)] or [np.zeros(0)])
    n = np.concatenate([normal_errors_deg(e, g, m) for e, g, m in zip(est_maps, gt_maps, masks)] or [np.zeros(0)])
    dt = np.linspace(0.0, 0.5, 51) if depth_thresholds is None else np.asarray(depth_thresholds, dtype=float)
    nt = np.linspace(0.0, 50.0, 51) if normal_thresholds is None else np.asarray(normal_thresholds, dtype=float)
    return ErrorCurves(dt, _fractions(d, dt), nt, _fractions(n, nt))


def write_curves_csv(curves: ErrorCurves, path) -> None:
    """``threshold,depth_fraction,normal_fraction`` rows.

    Both curves share the row index, so the two threshold grids must have
    equal length. ``threshold`` holds the depth threshold; when the normal
    grid differs it is written to a trailing ``normal_threshold`` column.
    """
    same = np.array_equal(curves.depth_thresholds, curves.normal_thresholds)
    if len(curves.depth_thresholds) != len(curves.normal_thresholds):
        raise ValueError("depth and normal threshold grids must have equal length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "depth_fraction", "normal_fraction"] + ([] if same else ["normal_threshold"]))
        for i, t in enumerate(curves.depth_thresholds):
            row = [repr(float(t)), repr(float(curves.depth_fraction[i])), repr(float(curves.normal_fraction[i]))]
            if not same:
                row.append(repr(float(curves.normal_thresholds[i])))
            w.writerow(row)


# -- point clouds -------------------------------------------------------------------


def _points(x) -> np.ndarray:
    p = x.positions if isinstance(x, OrientedPointCloud) else np.asarray(x, dtype=np.float64)
    return p.reshape(-1, 3)


def nearest_distances(query, reference) -> np.ndarray:
    """Distance from each ``query`` point to its nearest ``reference`` point."""
    q, r = _points(query), _points(reference)
    if len(q) == 0 or len(r) == 0:
        raise EmptyInputError("nearest-neighbour distances need two non-empty point sets")
    dist, _ = cKDTree(r).query(q, k=1)
    return dist


def cloud_accuracy(est, gt_samples) -> float:
    """Mean distance from estimated points to the nearest ground-truth sample."""
    return float(np.mean(nearest_distances(est, gt_samples)))


def cloud_completeness(gt_samples, est) -> float:
    """Mean distance from ground-truth samples to the nearest estimated point."""
    return float(np.mean(nearest_distances(gt_samples, est)))


def coverage(gt_samples, est, tolerance: float) -> float:
    """Fraction of ground-truth samples with an estimated point within ``tolerance``."""
    g = _points(gt_samples)
    if len(g) == 0:
        raise EmptyInputError("coverage needs ground-truth samples")
    if len(_points(est)) == 0:
        return 0.0
    return float(np.mean(nearest_distances(g, est) <= tolerance))


# -- ablation -------------------------------------------------------------------------

ABLATION_CONFIGS = ("neither", "pol_only", "dep_only", "both")


def _ablation_cost(name: str, base: CostConfig) -> CostConfig:
    if name == "neither":
        return base.baseline()
    if name == "pol_only":
        return base.replace(use_pol=True, use_dep=False)
    if name == "dep_only":
        return base.replace(use_pol=False, use_dep=True)
    if name == "both":
        return base.replace(use_pol=True, use_dep=True)
    raise ValueError(f"unknown ablation configuration {name!r}; expected one of {ABLATION_CONFIGS}")


@dataclass
class AblationRow:
    config: str
    mean_depth_err: float
    mean_normal_err_deg: float
    num_points: int
    accuracy: float
    completeness: float
    seconds: float
    maps: list | None = None
    cloud: OrientedPointCloud | None = None


def ablation_report(
    spec: synth.SceneSpec | None = None,
    engine: EngineConfig | None = None,
    cost: CostConfig | None = None,
    fusion: FusionConfig | None = None,
    configs=ABLATION_CONFIGS,
    rendered=None,
    keep_outputs: bool = False,
) -> list[AblationRow]:
    """Estimate every view of ``spec`` under each term configuration and
    tabulate mean depth and normal errors over visible pixels, plus cloud
    accuracy and completeness of the fused result.

    When phase 1 does not depend on the configuration (the default
    photometric phase 1) it is computed once and shared.
    """
    spec = spec or synth.default_scene()
    engine = engine or EngineConfig()
    cost = cost or CostConfig()
    fusion = fusion or FusionConfig()
    rendered = rendered if rendered is not None else synth.render(spec)
    views = [r.view for r in rendered]
    frames = [r.frame for r in rendered]
    gts = synth.gt_maps(rendered)
    samples = synth.sample_surface(spec, seed=spec.seed)
    packed = PackedViews(views, frames)

    def phase1(c):
        out = []
        for i, v in enumerate(views):
            dm = initialize(v, frames[i], engine)
            out.append(ViewProblem(packed, i, engine, c).run_phase(dm, 1))
        return out

    shared = None
    rows = []
    for name in configs:
        t0 = time.perf_counter()
        c = _ablation_cost(name, cost)
        if engine.phase1_cost == "photometric":
            if shared is None:
                shared = phase1(c)
            p1 = shared
        else:
            p1 = phase1(c)
        maps = p1
        if engine.geometric_phase:
            maps = []
            for i in range(len(views)):
                prob = ViewProblem(packed, i, engine, c)
                prob.set_source_maps(p1)
                maps.append(prob.run_phase(p1[i].copy(), 2))
        d = np.concatenate([depth_errors(m, g) for m, g in zip(maps, gts)])
        n = np.concatenate([normal_errors_deg(m, g) for m, g in zip(maps, gts)])
        filtered = [m.masked(reliability_filter(v, f, m, fusion)) for v, f, m in zip(views, frames, maps)]
        cloud = fuse(views, frames, filtered, fusion)
        if len(cloud):
            acc, comp = cloud_accuracy(cloud, samples), cloud_completeness(samples, cloud)
        else:
            acc = comp = float("nan")
        rows.append(
            AblationRow(
                name, float(np.mean(d)), float(np.mean(n)), len(cloud), acc, comp, time.perf_counter() - t0,
                maps if keep_outputs else None, cloud if keep_outputs else None,
            )
        )
        logger.info("ablation config=%s depth=%.4f normal=%.3f points=%d", name, rows[-1].mean_depth_err, rows[-1].mean_normal_err_deg, len(cloud))
    return rows


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    """``config,mean_depth_err,mean_normal_err_deg,num_points,accuracy,completeness`` rows."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["config", "mean_depth_err", "mean_normal_err_deg", "num_points", "accuracy", "completeness"])
        for r in rows:
            w.writerow([r.config, repr(r.mean_depth_err), repr(r.mean_normal_err_deg), r.num_points, repr(r.accuracy), repr(r.completeness)])
