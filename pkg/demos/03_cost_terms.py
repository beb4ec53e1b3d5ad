"""
The four cost terms
===================

Each hypothesis is scored by

* photometric consistency (bilateral-weighted NCC over the warped window),
* geometric consistency (forward-backward reprojection against source maps),
* polarimetric consistency (the AoP must match the normal's azimuth up to the
  pi/2 ambiguity, weighted by DoP),
* depth-normal consistency with the neighbouring plane hypotheses.

Here they are evaluated at a ground-truth hypothesis and at a wrong one.
"""

import math

import numpy as np

from polarpms import synth
from polarpms.costs import CostConfig, ambiguity_min_angle, delta, dop_weight, photometric_cost, polarimetric_cost
from polarpms.geometry import Hypothesis
from polarpms.patchmatch import select_source_views

# the ambiguity angle: distance of alpha - phi to the nearest multiple of pi/2
for a in (0.0, math.pi / 2, 1.0, 3.0):
    print(f"eta(alpha={a:.3f}, phi=0) = {ambiguity_min_angle(a, 0.0):.6f}")
print("delta(eta) at 0, pi/8, pi/4:", delta(np.array([0.0, math.pi / 8, math.pi / 4])))
print("DoP weights at 0, rho0/2, rho0, 1:", dop_weight(np.array([0.0, 0.0025, 0.005, 1.0])))

rendered = synth.render(synth.default_scene(width=64, height=64))
ref = rendered[2]
chosen = {v.view_id for v in select_source_views(ref.view, [r.view for r in rendered])}
sources = [(r.view, r.frame) for r in rendered if r.view.view_id in chosen]

v, u = 20, 32  # textured pixel in the upper half of the sphere
good = Hypothesis(ref.depth[v, u], ref.normal[v, u])
tilted = ref.normal[v, u] + np.array([0.4, 0.0, 0.0])
bad = Hypothesis(ref.depth[v, u] * 1.05, tilted / np.linalg.norm(tilted))

cfg = CostConfig()
for name, hyp in (("ground truth", good), ("perturbed", bad)):
    pho = photometric_cost((u, v), hyp, ref.view, ref.frame, sources, cfg)
    pol = polarimetric_cost((u, v), hyp, ref.view, ref.frame, sources, cfg)
    print(f"{name:>12}: photometric {pho:.4f}, polarimetric {pol:.4f}")
