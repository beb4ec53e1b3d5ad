"""Command-line pipeline: ``polarpms {synth,estimate,fuse,eval,ablate}``.

One ``key = value`` pipeline config with ``[engine]``, ``[cost]`` and
``[fusion]`` sections drives every stage; keys not given keep their library
defaults. Failures print a single ``polarpms: error: ...`` line and exit
non-zero.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import evaluation, synth
from .costs import CostConfig
from .fusion import FusionConfig, fuse, read_ply, reliability_filter, write_ply
from .geometry import read_cameras, write_cameras
from .patchmatch import EngineConfig, estimate_all
from .polar_image import load_dataset, load_maps, save_maps

logger = logging.getLogger("polarpms")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    """Malformed pipeline configuration."""


# -- pipeline config ---------------------------------------------------------------


def _parse(text: str, default, key: str, where: str):
    try:
        if isinstance(default, bool):
            low = text.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(text)
            return low in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = text.replace(",", " ").split()
            if default and isinstance(default[0], bool):
                return tuple(_parse(p, True, key, where) for p in parts)
            return tuple(float(p) for p in parts)
        return text.strip()
    except ValueError:
        raise ConfigError(f"{where}: bad value for key {key!r}: {text!r}") from None


# keys given in degrees in the file but stored in radians
_DEGREE_KEYS = {("engine", "theta_normal"), ("fusion", "theta_fuse")}


def _section(cp, name: str, cls, where: str, overrides=None):
    defaults = cls()
    known = {f.name for f in fields(cls)}
    kw = {}
    if cp is not None and cp.has_section(name):
        for key, text in cp[name].items():
            if key not in known:
                raise ConfigError(f"{where} [{name}]: unknown key {key!r}")
            value = _parse(text, getattr(defaults, key), key, f"{where} [{name}]")
            if (name, key) in _DEGREE_KEYS:
                value = math.radians(value)
            kw[key] = value
    kw.update(overrides or {})
    try:
        return cls(**kw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where} [{name}]: {e}") from None


def load_pipeline_config(path=None, engine_overrides=None, cost_overrides=None):
    """Read ``(EngineConfig, CostConfig, FusionConfig)`` from a pipeline file.

    Angles (``theta_normal``, ``theta_fuse``) are written in degrees.
    """
    cp = None
    where = "<defaults>"
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read(path)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e.message.splitlines()[0]}") from None
        where = str(path)
        for s in cp.sections():
            if s not in ("engine", "cost", "fusion"):
                raise ConfigError(f"{path}: unknown section [{s}]; expected [engine], [cost] or [fusion]")
    engine = _section(cp, "engine", EngineConfig, where, engine_overrides)
    cost = _section(cp, "cost", CostConfig, where, cost_overrides)
    fusion = _section(cp, "fusion", FusionConfig, where)
    return engine, cost, fusion


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec = synth.read_scene_config(args.scene)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    rendered = synth.render(spec)
    out = Path(args.out_dir)
    synth.save_rendered(out, rendered)
    # ground truth is self-contained: cameras plus the scene for surface sampling
    write_cameras(out / "gt" / "cameras.txt", [r.view for r in rendered])
    synth.write_scene_config(out / "gt" / "scene.cfg", spec)
    logger.info("rendered %d views into %s", len(rendered), out)
    return EXIT_OK


def _overrides(args):
    eng = {"seed": args.seed} if args.seed is not None else {}
    cost = {}
    if args.no_pol:
        cost["use_pol"] = False
    if args.no_depnormal:
        cost["use_dep"] = False
    return eng, cost


def cmd_estimate(args) -> int:
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    eng_o, cost_o = _overrides(args)
    engine, cost, _ = load_pipeline_config(args.config, eng_o, cost_o)
    views, frames = load_dataset(args.dataset_dir)
    maps = estimate_all(views, frames, engine, cost, threads=args.threads)
    save_maps(args.out_dir, views, maps)
    logger.info("wrote %d depth/normal maps to %s", len(maps), args.out_dir)
    return EXIT_OK


def cmd_fuse(args) -> int:
    _, _, fcfg = load_pipeline_config(args.config)
    views, frames = load_dataset(args.dataset_dir)
    maps = load_maps(args.maps_dir, views)
    filtered = [m.masked(reliability_filter(v, f, m, fcfg)) for v, f, m in zip(views, frames, maps)]
    cloud = fuse(views, frames, filtered, fcfg)
    write_ply(cloud, args.out_ply, binary=not args.ascii)
    logger.info("fused %d points into %s", len(cloud), args.out_ply)
    return EXIT_OK


def _gt_views(gt_dir: Path):
    for cand in (gt_dir / "cameras.txt", gt_dir.parent / "cameras.txt"):
        if cand.is_file():
            return read_cameras(cand)
    raise FileNotFoundError(f"no cameras.txt in {gt_dir} or its parent")


def cmd_eval(args) -> int:
    gt_dir = Path(args.gt_dir)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"ground-truth directory not found: {gt_dir}")
    src = Path(args.input)
    if src.is_file():
        if args.curves:
            raise ConfigError("--curves needs a maps directory, not a point cloud")
        scene_cfg = gt_dir / "scene.cfg"
        if not scene_cfg.is_file():
            raise FileNotFoundError(f"cloud evaluation needs {scene_cfg}")
        spec = synth.read_scene_config(scene_cfg)
        samples = synth.sample_surface(spec, seed=spec.seed)
        cloud = read_ply(src)
        row = evaluation.AblationRow(
            "cloud", math.nan, math.nan, len(cloud),
            evaluation.cloud_accuracy(cloud, samples), evaluation.cloud_completeness(samples, cloud), 0.0,
        )
        evaluation.write_ablation_csv([row], args.report)
        return EXIT_OK
    if not src.is_dir():
        raise FileNotFoundError(f"no such maps directory or cloud file: {src}")
    views = _gt_views(gt_dir)
    gts = synth.load_ground_truth(gt_dir, views)
    maps = load_maps(src, views)
    if args.curves:
        evaluation.write_curves_csv(evaluation.pixel_error_curves(maps, gts), args.report)
        return EXIT_OK
    d = np.concatenate([evaluation.depth_errors(m, g) for m, g in zip(maps, gts)])
    n = np.concatenate([evaluation.normal_errors_deg(m, g) for m, g in zip(maps, gts)])
    row = evaluation.AblationRow(
        "maps", float(np.mean(d)), float(np.mean(n)), int(sum(m.valid.sum() for m in maps)), math.nan, math.nan, 0.0
    )
    evaluation.write_ablation_csv([row], args.report)
    return EXIT_OK


def cmd_ablate(args) -> int:
    spec = synth.read_scene_config(args.scene)
    eng_o = {"seed": args.seed} if args.seed is not None else {}
    engine, cost, fcfg = load_pipeline_config(args.config, eng_o)
    rows = evaluation.ablation_report(spec, engine, cost, fcfg)
    evaluation.write_ablation_csv(rows, args.report)
    for r in rows:
        print(f"{r.config:8s} depth={r.mean_depth_err:.4f} normal={r.mean_normal_err_deg:.2f}deg points={r.num_points}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polarpms", description="Polarimetric PatchMatch multi-view stereo pipeline.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="render a synthetic dataset with ground truth")
    s.add_argument("scene", help="scene config file")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, default=None, help="override the scene seed")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("estimate", help="two-phase depth/normal estimation for every view")
    s.add_argument("dataset_dir")
    s.add_argument("out_dir")
    s.add_argument("--config", default=None, help="pipeline config file")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--threads", type=int, default=1, help="views estimated concurrently")
    s.add_argument("--no-pol", action="store_true", help="drop the polarimetric term")
    s.add_argument("--no-depnormal", action="store_true", help="drop the depth-normal term")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("fuse", help="filter and fuse maps into a PLY point cloud")
    s.add_argument("dataset_dir")
    s.add_argument("maps_dir")
    s.add_argument("out_ply")
    s.add_argument("--config", default=None)
    s.add_argument("--ascii", action="store_true", help="write ASCII instead of binary PLY")
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("eval", help="score maps or a fused cloud against ground truth")
    s.add_argument("input", help="maps directory or PLY file")
    s.add_argument("gt_dir")
    s.add_argument("report", help="output CSV")
    s.add_argument("--curves", action="store_true", help="write per-pixel error curves instead of means")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ablate", help="four-way ablation of the polarimetric and depth-normal terms")
    s.add_argument("scene")
    s.add_argument("report")
    s.add_argument("--config", default=None)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_ablate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"polarpms: error: {msg}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
