"""Reliability filtering of depth/normal maps and multi-view fusion into an
oriented, coloured point cloud.

A pixel is kept for fusion when it carries either a usable polarization cue
(DoP at least ``rho_t``) or enough texture (window variance at least
``lambda_t``). Fusion then walks the views in id order and the pixels of each
view in row-major order; every unconsumed pixel seeds a point that is emitted
only if enough views agree on its depth, normal and position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numba import njit
from scipy.ndimage import uniform_filter

from .geometry import CameraView
from .polar_image import DepthNormalMap, PolarFrame

__all__ = [
    "FusionConfig",
    "OrientedPointCloud",
    "PlyFormatError",
    "fuse",
    "patch_variance",
    "read_ply",
    "reliability_filter",
    "write_ply",
]


@dataclass(frozen=True)
class FusionConfig:
    """Thresholds for filtering and for the multi-view consistency test.

    ``conjunctive`` switches the reliability rule from "DoP or texture" to
    "DoP and texture".
    """

    rho_t: float = 0.05
    lambda_t: float = 1.0
    eps_rel: float = 0.01
    theta_fuse: float = math.radians(30.0)
    reproj_tol: float = 2.0
    min_views: int = 2
    window_radius: int = 5
    conjunctive: bool = False

    def __post_init__(self):
        for name in ("rho_t", "lambda_t", "eps_rel", "theta_fuse", "reproj_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.min_views < 1:
            raise ValueError("min_views must be >= 1")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")

    def replace(self, **kw) -> "FusionConfig":
        return replace(self, **kw)


@dataclass
class OrientedPointCloud:
    """Points with unit normals, 8-bit colours and the number of views that
    support each of them."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    colors: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.uint8))
    support: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
        self.support = np.asarray(self.support, dtype=np.int64).reshape(-1)
        n = len(self.positions)
        if not (len(self.normals) == len(self.colors) == len(self.support) == n):
            raise ValueError("positions, normals, colors and support must have equal length")
        if n and np.max(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)) > 1e-6:
            raise ValueError("normals must be unit length")

    def __len__(self) -> int:
        return len(self.positions)


# -- filtering -------------------------------------------------------------------


def patch_variance(gray, radius: int = 5) -> np.ndarray:
    """Unweighted intensity variance over each pixel's ``(2r+1)^2`` window,
    using only the in-image part of windows that overlap the border."""
    g = np.asarray(gray, dtype=np.float64)
    size = 2 * radius + 1
    ones = np.ones_like(g)
    cnt = uniform_filter(ones, size, mode="constant")
    m1 = uniform_filter(g, size, mode="constant") / cnt
    m2 = uniform_filter(g * g, size, mode="constant") / cnt
    return np.maximum(m2 - m1 * m1, 0.0)


def reliability_filter(view: CameraView, frame: PolarFrame, dmap: DepthNormalMap, cfg: FusionConfig | None = None) -> np.ndarray:
    """Boolean mask of the pixels of ``dmap`` that may take part in fusion."""
    cfg = cfg or FusionConfig()
    frame.check_view(view)
    if dmap.shape != frame.shape:
        raise ValueError(f"map shape {dmap.shape} does not match frame shape {frame.shape}")
    polar = frame.dop >= cfg.rho_t
    texture = patch_variance(frame.gray, cfg.window_radius) >= cfg.lambda_t
    cue = (polar & texture) if cfg.conjunctive else (polar | texture)
    return cue & dmap.valid


# -- fusion ----------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _to_world(rot, trans, Xc):
    # X = R^T (Xc - t)
    a0 = Xc[0] - trans[0]
    a1 = Xc[1] - trans[1]
    a2 = Xc[2] - trans[2]
    out = np.empty(3)
    for i in range(3):
        out[i] = rot[0, i] * a0 + rot[1, i] * a1 + rot[2, i] * a2
    return out


@njit(cache=True, nogil=True)
def _fuse_kernel(intr, rot, trans, depth, normal, valid, order, eps_rel, cos_theta, tol, min_views, pos, nrm, seeds, support):
    nv, h, w = depth.shape
    used = np.zeros((nv, h, w), dtype=np.bool_)
    land_m = np.empty(nv, dtype=np.int64)
    land_u = np.empty(nv, dtype=np.int64)
    land_v = np.empty(nv, dtype=np.int64)
    count = 0
    for oi in range(nv):
        r = order[oi]
        fx, fy, cx, cy = intr[r, 0], intr[r, 1], intr[r, 2], intr[r, 3]
        for v in range(h):
            for u in range(w):
                if not valid[r, v, u] or used[r, v, u]:
                    continue
                d = depth[r, v, u]
                Xc = np.array([d * (u - cx) / fx, d * (v - cy) / fy, d])
                X = _to_world(rot[r], trans[r], Xc)
                n_c = normal[r, v, u]
                n_w = np.empty(3)
                for i in range(3):
                    n_w[i] = rot[r, 0, i] * n_c[0] + rot[r, 1, i] * n_c[1] + rot[r, 2, i] * n_c[2]
                sum_x = X.copy()
                sum_n = n_w.copy()
                k = 0
                for mi in range(nv):
                    m = order[mi]
                    if m == r:
                        continue
                    Xm = rot[m] @ X + trans[m]
                    z = Xm[2]
                    if z <= 0.0:
                        continue
                    um = intr[m, 0] * Xm[0] / z + intr[m, 2]
                    vm = intr[m, 1] * Xm[1] / z + intr[m, 3]
                    iu = int(math.floor(um + 0.5))
                    iv = int(math.floor(vm + 0.5))
                    if iu < 0 or iu >= w or iv < 0 or iv >= h:
                        continue
                    if not valid[m, iv, iu] or used[m, iv, iu]:
                        continue
                    ds = depth[m, iv, iu]
                    if abs(ds - z) > eps_rel * z:
                        continue
                    nm_c = normal[m, iv, iu]
                    nm = np.empty(3)
                    for i in range(3):
                        nm[i] = rot[m, 0, i] * nm_c[0] + rot[m, 1, i] * nm_c[1] + rot[m, 2, i] * nm_c[2]
                    if nm[0] * n_w[0] + nm[1] * n_w[1] + nm[2] * n_w[2] < cos_theta:
                        continue
                    # backward: source pixel at its own depth, back into the seed view
                    fxm, fym, cxm, cym = intr[m, 0], intr[m, 1], intr[m, 2], intr[m, 3]
                    Ym = np.array([ds * (iu - cxm) / fxm, ds * (iv - cym) / fym, ds])
                    Y = _to_world(rot[m], trans[m], Ym)
                    Yr = rot[r] @ Y + trans[r]
                    if Yr[2] <= 0.0:
                        continue
                    ur = fx * Yr[0] / Yr[2] + cx
                    vr = fy * Yr[1] / Yr[2] + cy
                    if math.hypot(ur - u, vr - v) > tol:
                        continue
                    land_m[k] = m
                    land_u[k] = iu
                    land_v[k] = iv
                    k += 1
                    for i in range(3):
                        sum_x[i] += Y[i]
                        sum_n[i] += nm[i]
                if k + 1 < min_views:
                    continue
                nn = math.sqrt(sum_n[0] ** 2 + sum_n[1] ** 2 + sum_n[2] ** 2)
                if nn < 1e-12:
                    continue
                for i in range(3):
                    pos[count, i] = sum_x[i] / (k + 1)
                    nrm[count, i] = sum_n[i] / nn
                # camera-facing in the seed view
                c = np.empty(3)
                for i in range(3):
                    c[i] = -(rot[r, 0, i] * trans[r, 0] + rot[r, 1, i] * trans[r, 1] + rot[r, 2, i] * trans[r, 2])
                facing = 0.0
                for i in range(3):
                    facing += nrm[count, i] * (pos[count, i] - c[i])
                if facing > 0.0:
                    for i in range(3):
                        nrm[count, i] = -nrm[count, i]
                seeds[count, 0] = r
                seeds[count, 1] = v
                seeds[count, 2] = u
                support[count] = k + 1
                used[r, v, u] = True
                for j in range(k):
                    used[land_m[j], land_v[j], land_u[j]] = True
                count += 1
    return count


def fuse(
    views: list[CameraView],
    frames: list[PolarFrame],
    maps: list[DepthNormalMap],
    cfg: FusionConfig | None = None,
) -> OrientedPointCloud:
    """Fuse (already filtered) per-view maps into one point cloud.

    ``support`` counts the seed view together with every consistent view, and
    a point is emitted when it reaches ``cfg.min_views``.
    """
    cfg = cfg or FusionConfig()
    if not (len(views) == len(frames) == len(maps)):
        raise ValueError("need one frame and one map per view")
    if not views:
        return OrientedPointCloud()
    shapes = {v.shape for v in views} | {m.shape for m in maps}
    if len(shapes) != 1:
        raise ValueError(f"all views and maps must share one image size, got {sorted(shapes)}")
    intr = np.array([[v.fx, v.fy, v.cx, v.cy] for v in views])
    rot = np.ascontiguousarray(np.stack([v.rotation for v in views]))
    trans = np.ascontiguousarray(np.stack([v.translation for v in views]))
    depth = np.ascontiguousarray(np.stack([m.depth for m in maps]))
    normal = np.ascontiguousarray(np.stack([m.normal for m in maps]))
    valid = np.ascontiguousarray(np.stack([m.valid & (m.depth > 0) for m in maps]))
    order = np.argsort(np.array([v.view_id for v in views]), kind="stable").astype(np.int64)
    cap = int(valid.sum())
    pos = np.empty((cap, 3))
    nrm = np.empty((cap, 3))
    seeds = np.empty((cap, 3), dtype=np.int64)
    support = np.empty(cap, dtype=np.int64)
    n = _fuse_kernel(
        intr, rot, trans, depth, normal, valid, order,
        cfg.eps_rel, math.cos(cfg.theta_fuse), cfg.reproj_tol, cfg.min_views,
        pos, nrm, seeds, support,
    )
    colors = np.array([frames[r].rgb[v, u] for r, v, u in seeds[:n]]).reshape(-1, 3)
    return OrientedPointCloud(pos[:n], nrm[:n], np.clip(np.rint(colors), 0, 255), support[:n])


# -- PLY -------------------------------------------------------------------------


class PlyFormatError(ValueError):
    """Malformed or unsupported PLY content."""


_PLY_PROPS = (
    ("x", "double", "<f8"),
    ("y", "double", "<f8"),
    ("z", "double", "<f8"),
    ("nx", "double", "<f8"),
    ("ny", "double", "<f8"),
    ("nz", "double", "<f8"),
    ("red", "uchar", "u1"),
    ("green", "uchar", "u1"),
    ("blue", "uchar", "u1"),
    ("support", "int", "<i4"),
)
_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "<i2", "int16": "<i2", "ushort": "<u2", "uint16": "<u2",
    "int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4",
    "float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
}


def write_ply(cloud: OrientedPointCloud, path, binary: bool = True) -> None:
    """Write ``cloud`` as a PLY vertex list.

    Positions and normals are stored as doubles so binary files read back
    bit-exactly; ASCII files print the shortest round-tripping decimal form.
    """
    path = Path(path)
    n = len(cloud)
    header = ["ply", f"format {'binary_little_endian' if binary else 'ascii'} 1.0", f"element vertex {n}"]
    header += [f"property {t} {name}" for name, t, _ in _PLY_PROPS]
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")
    rec = np.empty(n, dtype=[(name, dt) for name, _, dt in _PLY_PROPS])
    for i, a in enumerate("xyz"):
        rec[a] = cloud.positions[:, i]
        rec["n" + a] = cloud.normals[:, i]
    for i, c in enumerate(("red", "green", "blue")):
        rec[c] = cloud.colors[:, i]
    rec["support"] = cloud.support
    try:
        with open(path, "wb") as fh:
            fh.write(head)
            if binary:
                fh.write(rec.tobytes())
            else:
                lines = []
                for p, nn, c, s in zip(cloud.positions, cloud.normals, cloud.colors, cloud.support):
                    vals = [repr(float(x)) for x in (*p, *nn)] + [str(int(x)) for x in (*c, s)]
                    lines.append(" ".join(vals))
                fh.write(("\n".join(lines) + ("\n" if lines else "")).encode("ascii"))
    except OSError as e:
        raise OSError(f"{path}: cannot write PLY: {e.strerror or e}") from e


def read_ply(path) -> OrientedPointCloud:
    """Read a vertex-only PLY (binary little-endian or ASCII).

    Missing normals, colours or support default to ``(0, 0, 1)``, white and 1.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise OSError(f"{path}: cannot read PLY: {e.strerror or e}") from e
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise PlyFormatError(f"{path}: not a PLY file (missing 'ply' magic or 'end_header')")
    lines = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    fmt = None
    count = None
    props = []
    in_vertex = False
    for ln in lines[1:]:
        tok = ln.split()
        if not tok or tok[0] in ("comment", "obj_info"):
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                count = int(tok[2])
            elif int(tok[2]) > 0:
                raise PlyFormatError(f"{path}: unsupported element '{tok[1]}'")
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list" or tok[1] not in _PLY_TYPES:
                raise PlyFormatError(f"{path}: unsupported property type '{' '.join(tok[1:-1])}'")
            props.append((tok[2], _PLY_TYPES[tok[1]]))
    if fmt not in ("binary_little_endian", "ascii") or count is None:
        raise PlyFormatError(f"{path}: need a vertex element in binary_little_endian or ascii format")
    names = [p[0] for p in props]
    if not {"x", "y", "z"} <= set(names):
        raise PlyFormatError(f"{path}: vertex element lacks x/y/z")
    dtype = np.dtype(props)
    if fmt == "binary_little_endian":
        if len(body) < count * dtype.itemsize:
            raise PlyFormatError(f"{path}: truncated vertex data ({len(body)} of {count * dtype.itemsize} bytes)")
        rec = np.frombuffer(body, dtype=dtype, count=count)
    else:
        rows = body.decode("ascii").split("\n")[:count]
        if len(rows) < count:
            raise PlyFormatError(f"{path}: expected {count} vertex lines, found {len(rows)}")
        rec = np.empty(count, dtype=dtype)
        for i, row in enumerate(rows):
            vals = row.split()
            if len(vals) != len(names):
                raise PlyFormatError(f"{path}: vertex line {i} has {len(vals)} values, expected {len(names)}")
            rec[i] = tuple(float(x) if dtype[j].kind == "f" else int(x) for j, x in enumerate(vals))

    def cols(keys, default):
        if set(keys) <= set(names):
            return np.stack([rec[k] for k in keys], axis=1)
        return np.tile(default, (count, 1))

    return OrientedPointCloud(
        cols(("x", "y", "z"), (0.0, 0.0, 0.0)).astype(np.float64),
        cols(("nx", "ny", "nz"), (0.0, 0.0, 1.0)).astype(np.float64),
        cols(("red", "green", "blue"), (255, 255, 255)).astype(np.uint8),
        rec["support"].astype(np.int64) if "support" in names else np.ones(count, dtype=np.int64),
    )
