"""Polarization imagery, per-view estimation maps and their on-disk formats.

Float rasters are stored as PFM (``Pf`` grayscale, ``PF`` three-channel),
little-endian, rows bottom-to-top as the format prescribes. RGB input is 8-bit
PNG or PPM. A dataset directory holds ``cameras.txt`` plus
``view_<id>_{rgb,aop,dop}.<ext>`` per view.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import CameraView, read_cameras, write_cameras

__all__ = [
    "DepthNormalMap",
    "PfmFormatError",
    "PolarFrame",
    "aop_dop_from_polarizer_stack",
    "load_dataset",
    "load_maps",
    "luminance",
    "read_map",
    "read_pfm",
    "read_rgb",
    "save_dataset",
    "save_maps",
    "write_map",
    "write_pfm",
    "write_rgb",
]

S0_FLOOR = 1e-6


def luminance(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=np.float64)
    return 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]


@dataclass
class PolarFrame:
    """Aligned RGB, angle-of-polarization and degree-of-polarization rasters.

    ``rgb`` is ``(H, W, 3)`` in ``[0, 255]``; ``aop`` is in radians, ``[0, pi)``,
    measured from the image x-axis toward the (downward) y-axis; ``dop`` in
    ``[0, 1]``.
    """

    rgb: np.ndarray
    aop: np.ndarray
    dop: np.ndarray

    def __post_init__(self):
        self.rgb = np.asarray(self.rgb, dtype=np.float64)
        self.aop = np.asarray(self.aop, dtype=np.float64)
        self.dop = np.asarray(self.dop, dtype=np.float64)
        if self.rgb.ndim == 2:
            self.rgb = np.repeat(self.rgb[..., None], 3, axis=2)
        h, w = self.rgb.shape[:2]
        if self.rgb.shape != (h, w, 3) or self.aop.shape != (h, w) or self.dop.shape != (h, w):
            raise ValueError(
                f"raster shapes disagree: rgb {self.rgb.shape}, aop {self.aop.shape}, dop {self.dop.shape}"
            )
        if np.any(self.aop < 0) or np.any(self.aop >= np.pi):
            raise ValueError("AoP values must lie in [0, pi)")
        if np.any(self.dop < 0) or np.any(self.dop > 1):
            raise ValueError("DoP values must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.aop.shape

    @property
    def gray(self) -> np.ndarray:
        return luminance(self.rgb)

    def check_view(self, view: CameraView) -> None:
        if self.shape != view.shape:
            raise ValueError(f"frame {self.shape} does not match view {view.view_id} {view.shape}")


@dataclass
class DepthNormalMap:
    """Per-pixel hypothesis (depth, camera-frame unit normal), its cost and a
    validity flag."""

    depth: np.ndarray
    normal: np.ndarray
    cost: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        h, w = self.depth.shape
        if self.normal.shape != (h, w, 3) or self.cost.shape != (h, w) or self.valid.shape != (h, w):
            raise ValueError("depth, normal, cost and valid rasters must share dimensions")

    @classmethod
    def empty(cls, height: int, width: int) -> "DepthNormalMap":
        return cls(
            depth=np.zeros((height, width)),
            normal=np.zeros((height, width, 3)),
            cost=np.zeros((height, width)),
            valid=np.zeros((height, width), dtype=bool),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    def copy(self) -> "DepthNormalMap":
        return DepthNormalMap(self.depth.copy(), self.normal.copy(), self.cost.copy(), self.valid.copy())

    def masked(self, keep: np.ndarray) -> "DepthNormalMap":
        out = self.copy()
        out.valid &= np.asarray(keep, dtype=bool)
        return out


def aop_dop_from_polarizer_stack(i0, i45, i90, i135, eps_s0: float = S0_FLOOR):
    """Linear Stokes estimate of AoP/DoP from four polarizer-angle intensities."""
    i0, i45, i90, i135 = (np.asarray(a, dtype=np.float64) for a in (i0, i45, i90, i135))
    if not (i0.shape == i45.shape == i90.shape == i135.shape):
        raise ValueError("polarizer images must share dimensions")
    s0 = (i0 + i45 + i90 + i135) / 2.0
    s1 = i0 - i90
    s2 = i45 - i135
    phi = 0.5 * np.arctan2(s2, s1)
    phi = np.where(phi < 0, phi + np.pi, phi)
    phi = np.where(phi >= np.pi, 0.0, phi)
    dark = s0 < eps_s0
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.minimum(1.0, np.hypot(s1, s2) / np.where(dark, 1.0, s0))
    rho = np.where(dark, 0.0, rho)
    phi = np.where(dark, 0.0, phi)
    if phi.ndim == 0:
        return float(phi), float(rho)
    return phi, rho


# -- PFM -------------------------------------------------------------------


class PfmFormatError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


_TOKEN = re.compile(rb"\S+")


def _header_tokens(buf: bytes, count: int):
    """Return ``count`` whitespace-separated header tokens and the offset just
    past the single whitespace byte terminating the last one."""
    tokens, pos = [], 0
    for _ in range(count):
        m = _TOKEN.search(buf, pos)
        if m is None:
            raise PfmFormatError("truncated header", len(buf))
        tokens.append((m.group(), m.start()))
        pos = m.end()
    if pos >= len(buf) or buf[pos : pos + 1] not in (b"\n", b" ", b"\r", b"\t"):
        raise PfmFormatError("header not terminated by whitespace", pos)
    return tokens, pos + 1


def read_pfm(path) -> np.ndarray:
    """Read a PFM file into float32 ``(H, W)`` or ``(H, W, 3)``, top row first."""
    buf = Path(path).read_bytes()
    tokens, data_start = _header_tokens(buf, 4)
    (magic, _), (w_tok, w_off), (h_tok, h_off), (s_tok, s_off) = tokens
    if magic == b"Pf":
        channels = 1
    elif magic == b"PF":
        channels = 3
    else:
        raise PfmFormatError(f"bad magic {magic!r}", 0)
    try:
        width = int(w_tok)
    except ValueError:
        raise PfmFormatError(f"bad width {w_tok!r}", w_off) from None
    try:
        height = int(h_tok)
    except ValueError:
        raise PfmFormatError(f"bad height {h_tok!r}", h_off) from None
    if width <= 0 or height <= 0:
        raise PfmFormatError(f"non-positive dimensions {width}x{height}", w_off)
    try:
        scale = float(s_tok)
    except ValueError:
        raise PfmFormatError(f"bad scale {s_tok!r}", s_off) from None
    if scale == 0:
        raise PfmFormatError("scale must be non-zero", s_off)
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    n = width * height * channels
    need = n * 4
    have = len(buf) - data_start
    if have < need:
        raise PfmFormatError(f"truncated payload: need {need} bytes, have {have}", len(buf))
    if have > need:
        raise PfmFormatError(f"{have - need} trailing bytes after payload", data_start + need)
    data = np.frombuffer(buf, dtype=dtype, count=n, offset=data_start).astype(np.float32)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).copy()


def write_pfm(path, raster) -> None:
    """Write a float raster as little-endian PFM. Values are cast to float32."""
    a = np.asarray(raster)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[..., 0]
    if a.ndim == 2:
        magic = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"cannot store raster of shape {a.shape} as PFM")
    h, w = a.shape[:2]
    out = io.BytesIO()
    out.write(magic + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
    out.write(np.ascontiguousarray(np.flipud(a), dtype="<f4").tobytes())
    Path(path).write_bytes(out.getvalue())


read_map = read_pfm
write_map = write_pfm


# -- RGB -------------------------------------------------------------------


def read_rgb(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64)


def write_rgb(path, rgb) -> None:
    from PIL import Image

    a = np.clip(np.rint(np.asarray(rgb, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(a, mode="RGB").save(path)


# -- dataset and map directories -------------------------------------------


def save_dataset(directory, views, frames, rgb_ext: str = "png") -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_cameras(d / "cameras.txt", views)
    for view, frame in zip(views, frames):
        stem = d / f"view_{view.view_id}"
        write_rgb(f"{stem}_rgb.{rgb_ext}", frame.rgb)
        write_pfm(f"{stem}_aop.pfm", frame.aop)
        write_pfm(f"{stem}_dop.pfm", frame.dop)


def load_dataset(directory) -> tuple[list[CameraView], list[PolarFrame]]:
    d = Path(directory)
    cam_file = d / "cameras.txt"
    if not cam_file.exists():
        raise FileNotFoundError(f"missing camera file {cam_file}")
    views = read_cameras(cam_file)
    frames = []
    for view in views:
        stem = f"view_{view.view_id}"
        rgb_path = next((d / f"{stem}_rgb.{ext}" for ext in ("png", "ppm") if (d / f"{stem}_rgb.{ext}").exists()), None)
        if rgb_path is None:
            raise FileNotFoundError(f"missing {d / (stem + '_rgb.png')} (or .ppm)")
        for kind in ("aop", "dop"):
            if not (d / f"{stem}_{kind}.pfm").exists():
                raise FileNotFoundError(f"missing {d / f'{stem}_{kind}.pfm'}")
        aop = read_pfm(d / f"{stem}_aop.pfm").astype(np.float64)
        # float32 storage can round values just below pi up to pi
        aop = np.where(aop >= np.pi, 0.0, aop)
        dop = np.clip(read_pfm(d / f"{stem}_dop.pfm").astype(np.float64), 0.0, 1.0)
        frame = PolarFrame(read_rgb(rgb_path), aop, dop)
        frame.check_view(view)
        frames.append(frame)
    return views, frames


def save_maps(directory, views, maps) -> None:
    """Write ``view_<id>_{depth,normal,cost}.pfm``; invalid pixels get depth 0."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for view, m in zip(views, maps):
        stem = d / f"view_{view.view_id}"
        write_pfm(f"{stem}_depth.pfm", np.where(m.valid, m.depth, 0.0))
        write_pfm(f"{stem}_normal.pfm", m.normal)
        write_pfm(f"{stem}_cost.pfm", m.cost)


def load_maps(directory, views) -> list[DepthNormalMap]:
    d = Path(directory)
    maps = []
    for view in views:
        stem = d / f"view_{view.view_id}"
        depth = read_pfm(f"{stem}_depth.pfm").astype(np.float64)
        normal = read_pfm(f"{stem}_normal.pfm").astype(np.float64)
        cost_path = Path(f"{stem}_cost.pfm")
        cost = read_pfm(cost_path).astype(np.float64) if cost_path.exists() else np.zeros_like(depth)
        if depth.shape != view.shape:
            raise ValueError(f"{stem}_depth.pfm: shape {depth.shape} does not match view {view.shape}")
        maps.append(DepthNormalMap(depth, normal, cost, depth > 0))
    return maps
