"""Pinhole camera geometry.

Camera frame convention: x right, y down, z forward. Poses are world-to-camera,
``X_cam = R @ X_world + t``. Pixel coordinates ``(u, v)`` address pixel centres,
so integer coordinates are the centres of raster cells ``[v, u]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "BehindCameraError",
    "CameraView",
    "DegeneratePlaneError",
    "Hypothesis",
    "UndefinedAzimuthError",
    "backproject",
    "image_azimuth",
    "pixel_ray",
    "plane_homography",
    "project",
    "read_cameras",
    "write_cameras",
]

DEGENERATE_PLANE_EPS = 1e-12
AZIMUTH_EPS = 1e-12


class BehindCameraError(ValueError):
    """Point has non-positive depth in the camera frame."""


class DegeneratePlaneError(ValueError):
    """Plane passes (numerically) through a camera centre."""


class UndefinedAzimuthError(ValueError):
    """Normal is parallel to the optical axis, so it has no image azimuth."""


@dataclass(frozen=True)
class CameraView:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int
    view_id: int = 0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if not np.allclose(R.T @ R, np.eye(3), rtol=0.0, atol=1e-9):
            raise ValueError(f"view {self.view_id}: rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError(f"view {self.view_id}: rotation must have det +1")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"view {self.view_id}: focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(f"view {self.view_id}: principal point outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @property
    def center(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def optical_axis(self) -> np.ndarray:
        """Unit viewing direction (camera +z) in world coordinates."""
        return self.rotation[2].copy()

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def world_to_camera(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.rotation.T + self.translation

    def camera_to_world(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.translation) @ self.rotation

    def in_bounds(self, u, v) -> bool:
        return 0.0 <= u <= self.width - 1 and 0.0 <= v <= self.height - 1


@dataclass(frozen=True)
class Hypothesis:
    """Local plane at a pixel: depth along the pixel ray and a unit normal in
    the camera frame of the view owning the pixel."""

    depth: float
    normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=np.float64).reshape(3))
        object.__setattr__(self, "depth", float(self.depth))

    def is_valid(self, view: CameraView, pixel, d_min: float = 0.0, d_max: float = math.inf) -> bool:
        """Check unit norm, camera-facing sign and depth range."""
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9:
            return False
        if float(self.normal @ pixel_ray(view, pixel)) >= 0.0:
            return False
        return d_min <= self.depth <= d_max


def pixel_ray(view: CameraView, pixel) -> np.ndarray:
    """Unit viewing ray of ``pixel`` in the camera frame."""
    u, v = pixel
    r = np.array([(u - view.cx) / view.fx, (v - view.cy) / view.fy, 1.0])
    return r / np.linalg.norm(r)


def backproject(view: CameraView, pixel, depth: float) -> np.ndarray:
    """Camera-frame point at camera-frame depth ``depth`` along ``pixel``'s ray."""
    if not depth > 0:
        raise ValueError(f"depth must be positive, got {depth}")
    u, v = pixel
    if not view.in_bounds(u, v):
        raise ValueError(f"pixel {pixel} outside {view.width}x{view.height} image")
    return depth * np.array([(u - view.cx) / view.fx, (v - view.cy) / view.fy, 1.0])


def project(view: CameraView, point) -> tuple[float, float, float]:
    """Project a world point; returns ``(u, v, z_cam)``."""
    Xc = view.rotation @ np.asarray(point, dtype=np.float64) + view.translation
    z = Xc[2]
    if z <= 0:
        raise BehindCameraError(f"point is behind camera {view.view_id} (z={z:.6g})")
    return (view.fx * Xc[0] / z + view.cx, view.fy * Xc[1] / z + view.cy, z)


def relative_pose(ref: CameraView, src: CameraView) -> tuple[np.ndarray, np.ndarray]:
    """Pose mapping reference-camera coordinates to source-camera coordinates."""
    R_rel = src.rotation @ ref.rotation.T
    t_rel = src.translation - R_rel @ ref.translation
    return R_rel, t_rel


def plane_homography(ref: CameraView, src: CameraView, pixel, hyp: Hypothesis) -> np.ndarray:
    """Homography induced by the hypothesis plane, reference pixels -> source pixels.

    The plane passes through the back-projection of ``pixel`` at ``hyp.depth``
    with normal ``hyp.normal`` (reference camera frame), i.e. ``n.X = n.X0``.
    """
    n = hyp.normal
    X0 = backproject(ref, pixel, hyp.depth)
    R_rel, t_rel = relative_pose(ref, src)
    plane_d = float(n @ X0)
    if abs(plane_d) < DEGENERATE_PLANE_EPS * np.linalg.norm(X0):
        raise DegeneratePlaneError("hypothesis plane passes through the reference centre")
    # plane offset as seen from the source camera centre
    c_src = -R_rel.T @ t_rel
    if abs(plane_d - float(n @ c_src)) < DEGENERATE_PLANE_EPS * np.linalg.norm(X0):
        raise DegeneratePlaneError("hypothesis plane passes through the source centre")
    return src.K @ (R_rel + np.outer(t_rel, n) / plane_d) @ ref.K_inv


def image_azimuth(view: CameraView, n_world):
    """Azimuth of a normal in the image plane of ``view``, in ``[0, 2*pi)``.

    Accepts a single 3-vector or an ``(..., 3)`` array. The rotation is applied
    with explicit sums so scalar and array inputs round identically.
    """
    from . import _kernels

    n = np.asarray(n_world, dtype=np.float64)
    R = view.rotation
    nx = R[0, 0] * n[..., 0] + R[0, 1] * n[..., 1] + R[0, 2] * n[..., 2]
    ny = R[1, 0] * n[..., 0] + R[1, 1] * n[..., 1] + R[1, 2] * n[..., 2]
    if n.ndim == 1:
        alpha = _kernels.azimuth(float(nx), float(ny))
        if alpha < 0.0:
            raise UndefinedAzimuthError("normal is parallel to the optical axis")
        return alpha
    flat = _kernels.azimuth_array(np.ravel(nx).astype(np.float64), np.ravel(ny).astype(np.float64))
    return flat.reshape(nx.shape)


# -- camera file -----------------------------------------------------------


def read_cameras(path) -> list[CameraView]:
    """Read a camera file.

    One record per line: ``id fx fy cx cy width height r11..r33 t1 t2 t3``.
    Blank lines and ``#`` comments are ignored.
    """
    path = Path(path)
    views = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            if len(tok) != 19:
                raise ValueError(f"{path}:{lineno}: expected 19 fields, got {len(tok)}")
            try:
                vid = int(tok[0])
                fx, fy, cx, cy = (float(x) for x in tok[1:5])
                width, height = int(tok[5]), int(tok[6])
                R = np.array([float(x) for x in tok[7:16]]).reshape(3, 3)
                t = np.array([float(x) for x in tok[16:19]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            views.append(CameraView(fx, fy, cx, cy, R, t, width, height, vid))
    return views


def write_cameras(path, views) -> None:
    lines = ["# id fx fy cx cy width height r11 r12 r13 r21 r22 r23 r31 r32 r33 t1 t2 t3"]
    for v in views:
        nums = [v.fx, v.fy, v.cx, v.cy]
        head = [str(v.view_id)] + [repr(float(x)) for x in nums] + [str(v.width), str(v.height)]
        tail = [repr(float(x)) for x in v.rotation.ravel()] + [repr(float(x)) for x in v.translation]
        lines.append(" ".join(head + tail))
    Path(path).write_text("\n".join(lines) + "\n")


def look_at(center, target, up=(0.0, 0.0, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera ``(R, t)`` for a camera at ``center`` looking at ``target``."""
    center = np.asarray(center, dtype=np.float64)
    z = np.asarray(target, dtype=np.float64) - center
    z /= np.linalg.norm(z)
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    if np.linalg.norm(x) < 1e-9:
        raise ValueError("viewing direction is parallel to the up vector")
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return R, -R @ center
