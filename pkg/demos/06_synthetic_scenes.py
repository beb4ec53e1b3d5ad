"""
Synthetic polarimetric scenes
=============================

Scenes are spheres and planes seen by a ring of cameras. Each pixel gets RGB,
AoP, DoP and ground-truth depth and normal. The AoP is built so the ambiguity
angle against the true normal's azimuth is exactly zero, in both diffuse and
specular reflection modes.
"""

import tempfile
from pathlib import Path

import numpy as np

from polarpms import synth
from polarpms.costs import ambiguity_min_angle
from polarpms.geometry import image_azimuth

spec = synth.default_scene()
print(f"{spec.n_cameras} cameras, {spec.width}x{spec.height}, band {spec.primitives[0].band} deg, "
      f"diameter {spec.diameter}")

for mode in ("diffuse", "specular"):
    rendered = synth.render(synth.default_scene(reflection=mode, width=48, height=48))
    worst = max(
        float(ambiguity_min_angle(image_azimuth(r.view, r.normal_world[r.mask]), r.frame.aop[r.mask]).max())
        for r in rendered
    )
    print(f"{mode}: largest ambiguity angle over all hit pixels = {worst}")

r = synth.render(spec)[0]
print("DoP at the silhouette approaches rho_max:", r.frame.dop.max(), "<=", spec.rho_max)
print("visible pixels per view:", int(r.mask.sum()))

# scenes are plain key = value files
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "scene.cfg"
    synth.write_scene_config(path, spec)
    print(path.read_text().splitlines()[:6])
    print("config round trip equal:", synth.read_scene_config(path) == spec)
