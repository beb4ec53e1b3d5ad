"""
Cameras, rays and plane-induced homographies
============================================

A ``CameraView`` maps world points to pixels with a pinhole model (x right,
y down, z forward). A local plane hypothesis at a reference pixel induces a
homography into any other view; PatchMatch uses it to warp its support window.
"""

import numpy as np

from polarpms.geometry import CameraView, Hypothesis, backproject, image_azimuth, look_at, plane_homography, project

# two cameras 0.5 apart, both looking at the origin from 4 units away
R0, t0 = look_at([0.0, -4.0, 0.0], [0.0, 0.0, 0.0])
R1, t1 = look_at([0.5, -4.0, 0.0], [0.0, 0.0, 0.0])
ref = CameraView(120.0, 120.0, 47.5, 47.5, R0, t0, 96, 96, view_id=0)
src = CameraView(120.0, 120.0, 47.5, 47.5, R1, t1, 96, 96, view_id=1)

# back-project a pixel at depth 4 and see where it lands in the other view
X = ref.camera_to_world(backproject(ref, (60.0, 40.0), 4.0))
print("world point:", X)
print("seen by view 1 at (u, v, depth):", project(src, X))

# a slanted plane through that pixel, expressed in the reference camera frame
n = np.array([0.3, -0.2, -1.0])
hyp = Hypothesis(4.0, n / np.linalg.norm(n))
H = plane_homography(ref, src, (60.0, 40.0), hyp)
p = H @ [60.0, 40.0, 1.0]
print("homography maps the centre pixel to", p[:2] / p[2])

# neighbouring pixels follow the plane, not a constant disparity
for du in (-5, 0, 5):
    q = H @ [60.0 + du, 40.0, 1.0]
    print(f"  u + {du:+d} -> {q[:2] / q[2]}")

# the image-plane azimuth of a normal is what polarization observes
print("azimuth of the plane normal (rad):", image_azimuth(ref, ref.rotation.T @ hyp.normal))
