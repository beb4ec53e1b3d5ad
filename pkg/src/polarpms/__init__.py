"""Polarimetric PatchMatch multi-view stereo.

Per-pixel plane hypotheses are searched PatchMatch-style and scored by
photometric, geometric, polarimetric and depth-normal consistency; the
resulting depth/normal maps are filtered and fused into an oriented point
cloud. A synthetic scene generator and an evaluation harness come with it.
"""

from .costs import CostConfig, ambiguity_min_angle, total_cost
from .evaluation import ablation_report, cloud_accuracy, cloud_completeness, pixel_error_curves
from .fusion import FusionConfig, OrientedPointCloud, fuse, read_ply, reliability_filter, write_ply
from .geometry import CameraView, Hypothesis, image_azimuth, plane_homography
from .patchmatch import EngineConfig, estimate_all, estimate_view
from .polar_image import DepthNormalMap, PolarFrame, read_pfm, write_pfm
from .synth import SceneSpec, default_scene, render

__version__ = "0.1.0"

__all__ = [
    "CameraView",
    "CostConfig",
    "DepthNormalMap",
    "EngineConfig",
    "FusionConfig",
    "Hypothesis",
    "OrientedPointCloud",
    "PolarFrame",
    "SceneSpec",
    "ablation_report",
    "ambiguity_min_angle",
    "cloud_accuracy",
    "cloud_completeness",
    "default_scene",
    "estimate_all",
    "estimate_view",
    "fuse",
    "image_azimuth",
    "pixel_error_curves",
    "plane_homography",
    "read_pfm",
    "read_ply",
    "reliability_filter",
    "render",
    "total_cost",
    "write_pfm",
    "write_ply",
]
