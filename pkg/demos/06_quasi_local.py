"""Radial-gauge connections, optical-function Killing forms and frame commutators.

Run: python3 demos/06_quasi_local.py
"""

import numpy as np

from kkcartan import fixtures as fx
from kkcartan.quasi_local import (
    OpticalFrame, RadialField, commutator_coefficients, cronstrom_connection, frame_commutator, lie_bracket_fd, optical_killing_forms,
    scaling_exponent,
)
from kkcartan.suite import gauss_lemma_metric

# Constant field strength: the radial-gauge connection is -F x / 2.
rng = np.random.default_rng(7)
F = rng.normal(size=(4, 4))
F -= F.T
x = np.array([0.4, -0.3, 0.2, 0.7])
theta, est = cronstrom_connection(RadialField(lambda y: F), x, return_estimate=True)
print("radial gauge vs -F x/2:", np.max(np.abs(theta + 0.5 * F @ x)), " quadrature estimate", est)

# Flat space: K = 4 eta, its trace-free part vanishes, box f = 8.
flat = optical_killing_forms(OpticalFrame(fx.minkowski().metric()), [0.3, 0.1, -0.2, 0.4])
print("\nMinkowski: K diag", np.diag(flat["K"]), " |CK|", np.max(np.abs(flat["CK"])), " box", flat["box_f"])

# Curved metric obeying the Gauss lemma: CK decays like the square of the distance.
of = OpticalFrame(gauss_lemma_metric(0.05))
direction = np.array([0.5, 0.3, -0.6, 0.4])
radii = 2.0 ** -np.arange(1, 7)
norms = [np.linalg.norm(optical_killing_forms(of, r * direction)["CK"]) for r in radii]
for r, n in zip(radii, norms):
    print(f"  r={r:<9.5f} |CK|={n:.3e}")
print("fitted exponent:", scaling_exponent(radii, norms))

# Frame commutators from the connection agree with a finite-difference Lie bracket.
kasner = fx.kasner(2 / 3, 2 / 3, -1 / 3)
p = [1.5, 0.1, 0.2, 0.3]
print("\n[e_0, e_1] from the connection:", frame_commutator(kasner, None, 0, 1, p))
print("finite-difference Lie bracket: ", lie_bracket_fd(kasner, 0, 1, p))
print("in the frame, -p_1/t e_1:      ", commutator_coefficients(kasner, None, 0, 1, p))
