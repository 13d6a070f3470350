"""Representation formulas for the flat wave equation in two and three space dimensions.

Run: python3 demos/05_wave_kernels.py
"""

import numpy as np

from kkcartan.suite import radial_gaussian
from kkcartan.wave_kernels import (
    CauchyData, QuadratureSpec, descent_2d, duhamel_solve, huygens_probe, kirchhoff_3d, plane_wave_data,
    radial_fdtd, smooth_bump,
)

# Plane waves are reproduced by the spherical-mean formula.
k = np.array([1.0, 1.0, 1.0])
x = np.array([0.1, 0.2, 0.3])
u, est = kirchhoff_3d(plane_wave_data(k), x, 0.7, return_estimate=True)
print(f"plane wave: {u:.12f} vs {np.sin(k @ x - np.sqrt(3) * 0.7):.12f} (doubling estimate {est:.1e})")

# Descent: 2D data lifted to 3D give the same value at any height.
data = CauchyData(2, lambda Y: np.exp(-np.sum(Y**2, -1)), lambda Y: np.sin(Y[..., 1]))
u2 = descent_2d(data, [0.2, -0.1], 1.0)
print("descent:", u2, [kirchhoff_3d(data.lifted(), [0.2, -0.1, z], 1.0) for z in (0.0, 2.0)])

# Huygens: after the shell of a compact pulse has passed, 3D is silent, 2D keeps ringing.
for t in (3.0, 5.0, 9.0):
    out = huygens_probe(lambda Y: 0.0, smooth_bump(1.0), 1.0, [0.0, 0.0], t)
    print(f"t={t}: 3D {out['u3d']:.1e}   2D tail {out['u2d']:.5f}")

# Duhamel with a constant unit source gives t^2 / 2.
print("unit source:", duhamel_solve(CauchyData(3, source=lambda Y, s: 1.0), x, 0.8).value, "vs", 0.32)

# Semilinear u_tt - lap u = -u^3 by Picard iteration, against a radial leapfrog solver.
p0, g0 = radial_gaussian(0.6)
p1, g1 = radial_gaussian(0.3)
cubic = CauchyData(3, g0, g1, nonlinearity=lambda u: -u**3, center=np.zeros(3))
probe = np.array([0.2, 0.1, 0.0])
res = duhamel_solve(cubic, probe, 0.5, QuadratureSpec(time=12))
ref = radial_fdtd(p0, p1, 0.5, np.linalg.norm(probe), lambda u: -u**3)[0]
print(f"\nPicard {res.value:.9f}  leapfrog {ref:.9f}  linear {res.linear:.9f}")
print("iterate distances:", " ".join(f"{d:.1e}" for d in res.iterate_history))
