"""
Polarization images and file formats
====================================

A polarization camera records intensities behind polarizers at 0, 45, 90 and
135 degrees. The Stokes parameters give the angle (AoP) and degree (DoP) of
linear polarization. Float rasters are stored as PFM, which round-trips
bit-exactly.
"""

import math
import tempfile
from pathlib import Path

import numpy as np

from polarpms.polar_image import aop_dop_from_polarizer_stack, read_pfm, write_pfm

# light polarized at 30 degrees with DoP 0.4 on top of intensity 1
phi, rho, s0 = math.radians(30.0), 0.4, 1.0
i = [0.5 * s0 * (1 + rho * math.cos(2 * (phi - math.radians(a)))) for a in (0, 45, 90, 135)]
aop, dop = aop_dop_from_polarizer_stack(*i)
print(f"recovered AoP {math.degrees(aop):.3f} deg, DoP {dop:.3f}")

# unpolarized light has no defined angle and zero degree
print("unpolarized:", aop_dop_from_polarizer_stack(0.7, 0.7, 0.7, 0.7))

# whole images work the same way
rng = np.random.default_rng(0)
stack = rng.uniform(0.0, 1.0, size=(4, 3, 5))
aop_img, dop_img = aop_dop_from_polarizer_stack(*stack)
print("AoP range", aop_img.min(), aop_img.max(), "DoP range", dop_img.min(), dop_img.max())

# PFM keeps every bit of a float32 raster
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dop.pfm"
    write_pfm(path, dop_img.astype(np.float32))
    back = read_pfm(path)
    print("PFM round trip exact:", back.tobytes() == dop_img.astype(np.float32).tobytes())
