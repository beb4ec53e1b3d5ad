"""Analytic ground-truth scenes: spheres and planes seen by a ring of cameras.

Each hit pixel gets Lambertian-shaded texture colour, an AoP aligned with the
image azimuth of the true normal (shifted by pi/2 for specular-dominant
surfaces) and a DoP of ``rho_max * sin^2(zenith)``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import _kernels as K
from .geometry import CameraView, image_azimuth, look_at
from .polar_image import DepthNormalMap, PolarFrame, read_pfm, save_dataset, write_pfm

__all__ = [
    "Plane",
    "RenderedView",
    "SceneSpec",
    "Sphere",
    "default_scene",
    "gt_maps",
    "load_ground_truth",
    "make_views",
    "read_scene_config",
    "render",
    "sample_surface",
    "save_rendered",
    "write_scene_config",
]

TEXTURES = ("checker", "gradient", "constant")
REFLECTIONS = ("diffuse", "specular")


@dataclass
class Sphere:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    texture: str = "checker"
    reflection: str = "diffuse"
    cell: float = 0.25
    color_a: tuple = (220.0, 200.0, 60.0)
    color_b: tuple = (40.0, 70.0, 180.0)
    # half-width in degrees of a constant-colour latitude band about the
    # sphere's equator (world z up); 0 disables it
    band: float = 0.0
    band_color: tuple = (150.0, 150.0, 150.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("sphere radius must be positive")
        _check_modes(self)


@dataclass
class Plane:
    point: tuple = (0.0, 0.0, 0.0)
    normal: tuple = (0.0, 0.0, 1.0)
    extent: float = 1.0
    texture: str = "checker"
    reflection: str = "diffuse"
    cell: float = 0.25
    color_a: tuple = (220.0, 200.0, 60.0)
    color_b: tuple = (40.0, 70.0, 180.0)

    def __post_init__(self):
        if self.extent <= 0:
            raise ValueError("plane extent must be positive")
        if np.linalg.norm(self.normal) == 0:
            raise ValueError("plane normal must be non-zero")
        _check_modes(self)


def _check_modes(p):
    if p.texture not in TEXTURES:
        raise ValueError(f"texture must be one of {TEXTURES}, got {p.texture!r}")
    if p.reflection not in REFLECTIONS:
        raise ValueError(f"reflection must be one of {REFLECTIONS}, got {p.reflection!r}")


@dataclass
class SceneSpec:
    """Everything :func:`render` needs.

    Cameras sit on a horizontal ring of radius ``ring_radius`` raised by
    ``elevation`` degrees and spread evenly over ``ring_arc`` degrees (a full
    360 ring places them at equal steps all the way round). ``fov`` is the
    horizontal field of view in degrees. RGB is box-filtered over
    ``supersample``**2 rays per pixel.
    """

    primitives: list = field(default_factory=lambda: [Sphere()])
    rho_max: float = 0.3
    aop_noise: float = 0.0
    intensity_noise: float = 0.0
    n_cameras: int = 6
    ring_radius: float = 4.0
    elevation: float = 20.0
    ring_arc: float = 100.0
    target: tuple = (0.0, 0.0, 0.0)
    width: int = 96
    height: int = 96
    fov: float = 40.0
    depth_range: tuple = (2.0, 6.0)
    light: tuple = (0.4, -0.3, 1.0)
    ambient: float = 0.35
    background: tuple = (0.0, 0.0, 0.0)
    supersample: int = 4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rho_max <= 1.0:
            raise ValueError("rho_max must lie in [0, 1]")
        if self.n_cameras < 2:
            raise ValueError("need at least two cameras")
        if self.supersample < 1:
            raise ValueError("supersample must be >= 1")
        if not 0 < self.depth_range[0] < self.depth_range[1]:
            raise ValueError("depth_range must satisfy 0 < near < far")

    @property
    def diameter(self) -> float:
        """Diameter of the bounding sphere of all primitives."""
        pts = []
        for p in self.primitives:
            if isinstance(p, Sphere):
                c = np.asarray(p.center, dtype=float)
                pts += [c + p.radius * s for s in np.vstack([np.eye(3), -np.eye(3)])]
            else:
                pts += list(_plane_corners(p))
        pts = np.asarray(pts)
        return float(np.max(np.linalg.norm(pts[:, None] - pts[None], axis=-1)))


def default_scene(**kw) -> SceneSpec:
    """Textured sphere whose equatorial band is a single flat colour, seen by
    six cameras spread over a 100 degree arc.

    ``band`` and ``reflection`` configure the sphere; other keywords go to
    :class:`SceneSpec`.
    """
    sphere = Sphere(band=kw.pop("band", 30.0), reflection=kw.pop("reflection", "diffuse"))
    return SceneSpec(primitives=[sphere], **kw)


@dataclass
class RenderedView:
    view: CameraView
    frame: PolarFrame
    depth: np.ndarray
    normal: np.ndarray  # camera frame, camera-facing
    normal_world: np.ndarray
    mask: np.ndarray


# -- cameras -------------------------------------------------------------------


def make_views(spec: SceneSpec) -> list[CameraView]:
    f = 0.5 * spec.width / math.tan(math.radians(spec.fov) / 2.0)
    cx, cy = (spec.width - 1) / 2.0, (spec.height - 1) / 2.0
    el = math.radians(spec.elevation)
    arc = math.radians(spec.ring_arc)
    full = abs(spec.ring_arc - 360.0) < 1e-9
    n = spec.n_cameras
    target = np.asarray(spec.target, dtype=float)
    views = []
    for k in range(n):
        if full:
            theta = 2.0 * math.pi * k / n
        else:
            theta = -arc / 2.0 + arc * k / (n - 1)
        # ring starts on the -y axis so camera 0 looks along +y
        c = target + spec.ring_radius * np.array(
            [math.cos(el) * math.sin(theta), -math.cos(el) * math.cos(theta), math.sin(el)]
        )
        R, t = look_at(c, target)
        views.append(CameraView(f, f, cx, cy, R, t, spec.width, spec.height, k))
    return views


# -- ray casting ---------------------------------------------------------------


def _plane_axes(p: Plane):
    n = np.asarray(p.normal, dtype=float)
    n = n / np.linalg.norm(n)
    a = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, a)
    e1 /= np.linalg.norm(e1)
    return n, e1, np.cross(n, e1)


def _plane_corners(p: Plane):
    _, e1, e2 = _plane_axes(p)
    c = np.asarray(p.point, dtype=float)
    for s1 in (-1, 1):
        for s2 in (-1, 1):
            yield c + p.extent * (s1 * e1 + s2 * e2)


def _intersect(prim, origin, dirs):
    """Ray parameter ``t`` (inf on miss) and world normals for rays
    ``origin + t * dirs``."""
    if isinstance(prim, Sphere):
        c = np.asarray(prim.center, dtype=float)
        oc = origin - c
        a = np.einsum("...i,...i->...", dirs, dirs)
        b = dirs @ oc
        cc = oc @ oc - prim.radius**2
        disc = b * b - a * cc
        hit = disc >= 0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        t = (-b - sq) / a
        t = np.where(hit & (t > 0), t, np.inf)
        pts = origin + t[..., None] * dirs
        nrm = (pts - c) / prim.radius
        return t, np.where(np.isfinite(t)[..., None], nrm, 0.0)
    n, e1, e2 = _plane_axes(prim)
    p0 = np.asarray(prim.point, dtype=float)
    den = dirs @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((p0 - origin) @ n) / den
    pts = origin + np.where(np.isfinite(t), t, 0.0)[..., None] * dirs
    rel = pts - p0
    inside = (np.abs(rel @ e1) <= prim.extent) & (np.abs(rel @ e2) <= prim.extent)
    t = np.where(np.isfinite(t) & (t > 0) & inside & (np.abs(den) > 1e-12), t, np.inf)
    nrm = np.broadcast_to(n, dirs.shape).copy()
    return t, nrm


def _cell_hash(cells):
    """Deterministic pseudo-random value in [0, 1) per integer cell index."""
    h = (cells[..., 0] * 73856093) ^ (cells[..., 1] * 19349663) ^ (cells[..., 2] * 83492791)
    h = (h ^ (h >> 13)) * 1274126177
    return ((h ^ (h >> 16)) & 0xFFFF) / 65536.0


def _albedo(prim, pts):
    a = np.asarray(prim.color_a, dtype=float)
    b = np.asarray(prim.color_b, dtype=float)
    if prim.texture == "constant":
        col = np.broadcast_to(a, pts.shape).copy()
    elif prim.texture == "checker":
        cells = np.floor(pts / prim.cell).astype(np.int64)
        parity = np.sum(cells, axis=-1) % 2
        col = np.where(parity[..., None] == 0, a, b)
        # per-cell brightness breaks the period so matching has a unique optimum
        col = col * (0.55 + 0.45 * _cell_hash(cells))[..., None]
    else:
        s = 0.5 + 0.5 * np.sin(2.0 * math.pi * pts.sum(axis=-1) / (4.0 * prim.cell))
        col = a + (b - a) * s[..., None]
    if isinstance(prim, Sphere) and prim.band > 0:
        rel = (pts - np.asarray(prim.center, dtype=float)) / prim.radius
        lat = np.degrees(np.arcsin(np.clip(rel[..., 2], -1.0, 1.0)))
        col = np.where((np.abs(lat) <= prim.band)[..., None], np.asarray(prim.band_color, dtype=float), col)
    return col


def _aop_from_azimuth(alpha, specular):
    """AoP ``a - o`` where ``a`` is the azimuth wrapped to ``[-pi, pi)`` and
    ``o`` is the ambiguity offset that lands the result in ``[0, pi)``. Built
    this way the ambiguity angle against the true azimuth is exactly zero."""
    o = K.AMBIGUITY_OFFSETS  # -2pi, -3pi/2, -pi, -pi/2, 0, pi/2, pi
    a = np.where(alpha >= np.pi, alpha - 2.0 * np.pi, alpha)
    if specular:
        off = np.where(a < o[3], o[1], np.where(a < o[5], o[3], o[5]))
    else:
        off = np.where(a < 0.0, o[2], 0.0)
    phi = a - off
    return np.where(phi >= np.pi, phi - np.pi, phi)


def _cast(spec: SceneSpec, view: CameraView, uu, vv):
    """Nearest hit along the rays through pixel coordinates ``(uu, vv)``."""
    ray_cam = np.stack([(uu - view.cx) / view.fx, (vv - view.cy) / view.fy, np.ones_like(uu)], axis=-1)
    dirs = ray_cam @ view.rotation
    origin = view.center
    best_t = np.full(uu.shape, np.inf)
    best_n = np.zeros(uu.shape + (3,))
    best_p = np.full(uu.shape, -1)
    for i, prim in enumerate(spec.primitives):
        t, nrm = _intersect(prim, origin, dirs)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_n = np.where(closer[..., None], nrm, best_n)
        best_p = np.where(closer, i, best_p)
    mask = np.isfinite(best_t)
    pts = origin + np.where(mask, best_t, 0.0)[..., None] * dirs
    # camera-facing world normals
    facing = np.einsum("...i,...i->...", best_n, dirs)
    n_world = np.where((facing > 0)[..., None], -best_n, best_n)
    n_world = np.where(mask[..., None], n_world, 0.0)
    return dirs, mask, best_t, best_p, pts, n_world


def _shade(spec: SceneSpec, light, mask, best_p, pts, n_world):
    rgb = np.empty(mask.shape + (3,))
    rgb[...] = np.asarray(spec.background, dtype=float)
    shade = spec.ambient + (1.0 - spec.ambient) * np.clip(n_world @ light, 0.0, None)
    for i, prim in enumerate(spec.primitives):
        sel = best_p == i
        if sel.any():
            rgb[sel] = _albedo(prim, pts[sel]) * shade[sel][:, None]
    return rgb


def render(spec: SceneSpec) -> list[RenderedView]:
    """Ray-cast every view of ``spec``.

    Geometry, AoP and DoP come from the ray through each pixel centre. RGB is
    the box-filtered mean of ``supersample`` x ``supersample`` sub-pixel rays,
    so texture edges are area-sampled like a real sensor would see them.
    """
    views = make_views(spec)
    rng = np.random.default_rng(spec.seed)
    light = np.asarray(spec.light, dtype=float)
    light /= np.linalg.norm(light)
    out = []
    for view in views:
        h, w = view.height, view.width
        uu, vv = np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float))
        dirs, mask, best_t, best_p, pts, n_world = _cast(spec, view, uu, vv)
        depth = np.where(mask, best_t, 0.0)

        s = spec.supersample
        if s == 1:
            rgb = _shade(spec, light, mask, best_p, pts, n_world)
        else:
            rgb = np.zeros((h, w, 3))
            for j in range(s):
                for i in range(s):
                    sub = _cast(spec, view, uu + (i + 0.5) / s - 0.5, vv + (j + 0.5) / s - 0.5)
                    rgb += _shade(spec, light, sub[1], sub[3], sub[4], sub[5])
            rgb /= s * s

        aop = np.zeros((h, w))
        for i, prim in enumerate(spec.primitives):
            sel = best_p == i
            if not sel.any():
                continue
            with np.errstate(invalid="ignore"):
                alpha = image_azimuth(view, n_world[sel])
            defined = np.isfinite(alpha)
            phi = _aop_from_azimuth(np.where(defined, alpha, 0.0), prim.reflection == "specular")
            aop[sel] = np.where(defined, phi, 0.0)
        if spec.intensity_noise > 0:
            noise = rng.normal(0.0, spec.intensity_noise, size=(h, w, 3))
            rgb = np.where(mask[..., None], rgb + noise, rgb)
        rgb = np.clip(np.rint(rgb), 0.0, 255.0)
        if spec.aop_noise > 0:
            noisy = np.mod(aop + rng.normal(0.0, spec.aop_noise, size=(h, w)), np.pi)
            aop = np.where(mask, np.where(noisy >= np.pi, 0.0, noisy), aop)

        cos_z = -np.einsum("...i,...i->...", n_world, dirs) / np.linalg.norm(dirs, axis=-1)
        dop = np.where(mask, np.clip(spec.rho_max * (1.0 - cos_z**2), 0.0, 1.0), 0.0)
        n_cam = n_world @ view.rotation.T
        out.append(
            RenderedView(
                view=view,
                frame=PolarFrame(rgb, aop, dop),
                depth=depth,
                normal=np.where(mask[..., None], n_cam, 0.0),
                normal_world=n_world,
                mask=mask,
            )
        )
    return out


def gt_maps(rendered: list[RenderedView]) -> list[DepthNormalMap]:
    return [
        DepthNormalMap(r.depth.copy(), r.normal.copy(), np.zeros_like(r.depth), r.mask.copy()) for r in rendered
    ]


# -- ground-truth surface samples ----------------------------------------------


def sample_surface(spec: SceneSpec, density: float = 4000.0, seed: int = 0) -> np.ndarray:
    """Uniform-area samples of every primitive, ``density`` points per unit area."""
    rng = np.random.default_rng(seed)
    chunks = []
    for p in spec.primitives:
        if isinstance(p, Sphere):
            n = max(1, int(round(density * 4.0 * math.pi * p.radius**2)))
            d = rng.normal(size=(n, 3))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            chunks.append(np.asarray(p.center, dtype=float) + p.radius * d)
        else:
            n = max(1, int(round(density * (2.0 * p.extent) ** 2)))
            _, e1, e2 = _plane_axes(p)
            ab = rng.uniform(-p.extent, p.extent, size=(n, 2))
            chunks.append(np.asarray(p.point, dtype=float) + ab[:, :1] * e1 + ab[:, 1:] * e2)
    return np.concatenate(chunks, axis=0)


# -- files -----------------------------------------------------------------------


def save_rendered(dataset_dir, rendered: list[RenderedView], gt_dir=None) -> None:
    """Write the dataset (cameras + RGB/AoP/DoP) and ground truth
    (``view_<id>_{depth,normal,mask}.pfm``, ``gt_dir`` defaulting to
    ``<dataset_dir>/gt``)."""
    views = [r.view for r in rendered]
    save_dataset(dataset_dir, views, [r.frame for r in rendered])
    gt = Path(gt_dir) if gt_dir is not None else Path(dataset_dir) / "gt"
    gt.mkdir(parents=True, exist_ok=True)
    for r in rendered:
        stem = gt / f"view_{r.view.view_id}"
        write_pfm(f"{stem}_depth.pfm", r.depth)
        write_pfm(f"{stem}_normal.pfm", r.normal)
        write_pfm(f"{stem}_mask.pfm", r.mask.astype(np.float32))


def load_ground_truth(gt_dir, views) -> list[DepthNormalMap]:
    gt = Path(gt_dir)
    maps = []
    for v in views:
        stem = gt / f"view_{v.view_id}"
        depth = read_pfm(f"{stem}_depth.pfm").astype(np.float64)
        normal = read_pfm(f"{stem}_normal.pfm").astype(np.float64)
        mask = read_pfm(f"{stem}_mask.pfm") > 0.5
        maps.append(DepthNormalMap(depth, normal, np.zeros_like(depth), mask))
    return maps


_PRIM_TYPES = {"sphere": Sphere, "plane": Plane}


def _parse_value(text: str, default):
    if isinstance(default, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(float(x) for x in text.replace(",", " ").split())
    return text.strip()


def _format_value(value) -> str:
    if isinstance(value, (tuple, list)):
        return " ".join(repr(float(x)) for x in value)
    return str(value)


def _fill(cls, section, where):
    defaults = cls()
    kw = {}
    names = {f.name for f in fields(cls)} - {"primitives"}
    for key, text in section.items():
        if key not in names:
            raise ValueError(f"{where}: unknown key {key!r}")
        try:
            kw[key] = _parse_value(text, getattr(defaults, key))
        except ValueError:
            raise ValueError(f"{where}: bad value for {key!r}: {text!r}") from None
    return kw


def read_scene_config(path) -> SceneSpec:
    """Parse a scene file: a ``[scene]`` section plus ``[sphere <name>]`` /
    ``[plane <name>]`` sections, all ``key = value``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"scene file not found: {path}")
    cp.read(path)
    kw = _fill(SceneSpec, cp["scene"], f"{path} [scene]") if cp.has_section("scene") else {}
    prims = []
    for name in cp.sections():
        if name == "scene":
            continue
        kind = name.split()[0].lower()
        if kind not in _PRIM_TYPES:
            raise ValueError(f"{path}: unknown section [{name}]")
        cls = _PRIM_TYPES[kind]
        prims.append(cls(**_fill(cls, cp[name], f"{path} [{name}]")))
    if not prims:
        prims = [Sphere(band=30.0)]
    return SceneSpec(primitives=prims, **kw)


def write_scene_config(path, spec: SceneSpec) -> None:
    cp = configparser.ConfigParser()
    cp["scene"] = {k: _format_value(v) for k, v in asdict(spec).items() if k != "primitives"}
    for i, p in enumerate(spec.primitives):
        kind = "sphere" if isinstance(p, Sphere) else "plane"
        cp[f"{kind} {i}"] = {k: _format_value(v) for k, v in asdict(p).items()}
    with open(path, "w") as fh:
        cp.write(fh)
