"""Third-derivative identities: the Penrose wave equation and the Bel-Robinson tensor.

Run: python3 demos/02_penrose_bel_robinson.py
"""

import numpy as np

from kkcartan import fixtures as fx
from kkcartan.cartan_curvature import (
    bel_robinson, curvature_two_forms, divergence_bel_robinson, penrose_terms, penrose_wave_residual, weyl_tensor,
)

schw = curvature_two_forms(fx.schwarzschild(1.0))
x = [0.0, 4.0, np.pi / 2, 0.0]

# Each block of the wave operator acting on curvature is of the size of Riem^2;
# only their sum cancels in vacuum.
for name, block in penrose_terms(schw, x).items():
    print(f"{name:>18}: max {np.max(np.abs(block)):.3e}")
print("residual at step 1e-3:", np.max(np.abs(penrose_wave_residual(schw, x, 1e-3))))

# Convergence of the finite-difference residual under step halving.
coarse, fine = (np.max(np.abs(penrose_wave_residual(schw, x, h))) for h in (0.2, 0.1))
print(f"observed order {np.log2(coarse / fine):.2f}")

# Bel-Robinson: totally symmetric, positive on timelike vectors, divergence-free in vacuum.
kasner = fx.kasner(2 / 3, 2 / 3, -1 / 3)
Q = bel_robinson(weyl_tensor(curvature_two_forms(kasner)))
p = [1.2, 0.0, 0.0, 0.0]
print("\nsymmetry defect:", Q.symmetry_defect(p))
print("energy Q(e0,e0,e0,e0):", Q.frame(p)[0, 0, 0, 0])
rng = np.random.default_rng(0)
v = rng.uniform(-0.5, 0.5, 3)
T = np.concatenate([[1.0], v]) / np.sqrt(1 - v @ v)
print("Q(T,T,T,T) for a boosted observer:", np.einsum("abcd,a,b,c,d->", Q.frame(p), T, T, T, T))
print("divergence:", np.max(np.abs(divergence_bel_robinson(Q, p, 1e-3))))
