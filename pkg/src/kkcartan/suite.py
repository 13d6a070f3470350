"""Acceptance checks shared by the ``suite`` command and the acceptance tests.

Each criterion is a function returning a list of :class:`~kkcartan.report.Check`.
Exceptions raised inside a criterion become a single failing check, so one broken
module never hides the verdicts of the others.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from . import fixtures as fx
from .adm_phase_space import (
    CanonicalState, GaugeData, Grid2D, bel_robinson_density, constraint_propagation_check, hamiltonian_constraint,
    kasner_slice, momentum_constraint, weyl_adm,
)
from .cartan_curvature import (
    bel_robinson, contract_curvature, coordinate_riemann_oracle, curvature_two_forms, divergence_bel_robinson,
    penrose_wave_residual, solve_spin_connection, weyl_tensor,
)
from .dimensional_reduction import (
    KKData, assemble_kk_coframe, assemble_riemann, project_4d_ricci, reduced_riemann, reduced_scalar_curvature,
    ricci_projections, twist_potential,
)
from .errors import NonIntegrableError
from .frame_algebra import Chart, MetricField
from .quasi_local import OpticalFrame, RadialField, cronstrom_connection, optical_killing_forms, scaling_exponent
from .report import Check
from .wave_kernels import (
    CauchyData, descent_2d, duhamel_solve, huygens_probe, kirchhoff_3d, plane_wave_data, radial_fdtd, smooth_bump,
)

THREADS_ENV = "KKCARTAN_THREADS"
TAU = 2 * np.pi
ORACLE = "oracle"
FORMULA = "closed form"


def sup(a) -> float:
    return float(np.max(np.abs(a)))


def bound(name: str, value, tol: float, provenance: str, detail: str = "") -> Check:
    """``value <= tol`` for a non-negative error measure."""
    return Check(name, float(value), 0.0, tol, provenance, "le", detail)


def at_least(name: str, value, floor: float, provenance: str, detail: str = "") -> Check:
    return Check(name, float(value), float(floor), 0.0, provenance, "ge", detail)


def order(coarse: float, fine: float, ratio: float = 2.0) -> float:
    return float(np.log(coarse / fine) / np.log(ratio))


# -- shared fixtures ------------------------------------------------------------

KASNER_P = (2 / 3, 2 / 3, -1 / 3)
KK_CHART = Chart(("t", "x1", "x2"), (-1, 1, 1), ((-2, 2),) * 3)
CURVED_KK = dict(
    gamma="0.2*sin(x1) + 0.1*t*x2",
    A=["0.3*x1*x2", "0.2*cos(t + x2)", "0.1*x1 + 0.2*t*t"],
    metric=[["-1 - 0.1*x1*x1", "0.05*t", "0.02*x2"], ["", "1 + 0.1*sin(t)", "0.03*x1"], ["", "", "1 + 0.05*x2*x2"]],
)


def curved_kk(**overrides) -> KKData:
    """Inhomogeneous reduction data with every block switched on; ``A=None`` gives the polarized case."""
    args = dict(CURVED_KK)
    args.update(overrides)
    return KKData.from_expressions(KK_CHART, **args)


def kasner_points(rng, n, lo=0.5, hi=3.0):
    pts = rng.uniform(-1, 1, (n, 4))
    pts[:, 0] = rng.uniform(lo, hi, n)
    return pts


def schwarzschild_points(rng, n, lo=3.0, hi=8.0):
    return np.column_stack([rng.uniform(-1, 1, n), rng.uniform(lo, hi, n),
                            rng.uniform(0.3, np.pi - 0.3, n), rng.uniform(-3, 3, n)])


def synthetic_state(n=48, kk=False, twist=False) -> CanonicalState:
    """Smooth periodic canonical data that violates the constraints everywhere."""
    g = Grid2D.square(n)
    X, Y = g.coords()
    off = 0.1 * np.cos(TAU * (X + Y))
    q = np.array([[1 + 0.2 * np.sin(TAU * X), off], [off, 1.3 + 0.15 * np.cos(TAU * Y)]])
    mix = 0.2 * np.sin(TAU * X)
    pi = np.array([[0.3 * np.cos(TAU * Y) + 0.1, mix], [mix, -0.2 + 0.1 * np.sin(TAU * (X - Y))]])
    kw = {}
    if twist:
        kw = dict(omega=0.3 * np.sin(TAU * (X - Y)), p_omega=0.2 * np.cos(TAU * X))
    if kk:
        kw = dict(A=np.array([0.2 * np.sin(TAU * Y), 0.3 * np.cos(TAU * X) + 0.1 * np.sin(TAU * (X + Y))]),
                  E=np.array([0.1 * np.cos(TAU * X), 0.2 + 0.1 * np.sin(TAU * Y)]))
    return CanonicalState(g, q, pi, 0.2 * np.sin(TAU * X) * np.cos(TAU * Y),
                          0.3 + 0.2 * np.cos(TAU * (X + 2 * Y)), **kw)


def wavy_gauge(g: Grid2D) -> GaugeData:
    X, Y = g.coords()
    return GaugeData(g, N=1 + 0.2 * np.sin(TAU * X) * np.sin(TAU * Y),
                     shift=np.array([0.1 * np.cos(TAU * Y), 0.15 * np.sin(TAU * X)]))


def radial_gaussian(amplitude=1.0, width2=0.25):
    def profile(r):
        return amplitude * np.exp(-np.asarray(r) ** 2 / width2)

    return profile, (lambda Y: profile(np.linalg.norm(Y, axis=-1)))


def gauss_lemma_metric(eps: float, seed: int = 3) -> MetricField:
    """eta + eps R_{m a n b} x^a x^b for an algebraic curvature tensor R; it satisfies g x = eta x."""
    S = np.random.default_rng(seed).normal(size=(4, 4)) * 0.5
    S = S + S.T
    R = np.einsum("mn,ab->manb", S, S) - np.einsum("mb,an->manb", S, S)
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])

    def fn(x, p):
        return eta + p * jnp.einsum("manb,a,b->mn", R, x, x)

    return MetricField(fx.minkowski().chart, fn, eps)


# -- criteria -------------------------------------------------------------------


def cartan_vs_oracle() -> list[Check]:
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    out = []
    worst = 0.0
    for seed in range(20):
        frame = fx.perturbed_flat(seed, 1e-2)
        curv = curvature_two_forms(frame)
        oracle = coordinate_riemann_oracle(fx.perturbed_flat_metric(seed, 1e-2))
        for p in rng.uniform(-1, 1, (3, 4)):
            worst = max(worst, sup(curv.frame(p) - oracle.in_frame(frame, p)))
    out.append(bound("perturbed_flat_x20.analytic", worst, 1e-5, ORACLE))
    named = [("kasner", fx.kasner(*KASNER_P), kasner_points(rng, 4)),
             ("schwarzschild", fx.schwarzschild(1.0), schwarzschild_points(rng, 4)),
             ("equivariant", fx.equivariant("0.3*sin(t)*r", "0.1*r*r*cos(t)"),
              [[0.2, 1.0, 0.3], [-0.5, 2.5, 1.0], [1.1, 0.7, -0.4]])]
    for name, frame, pts in named:
        curv = curvature_two_forms(frame)
        oracle = coordinate_riemann_oracle(frame.metric())
        out.append(bound(f"{name}.analytic", max(sup(curv.frame(p) - oracle.in_frame(frame, p)) for p in pts),
                         1e-5, ORACLE))
    fd_cases = [("perturbed_flat_7", fx.perturbed_flat(7), fx.perturbed_flat_metric(7), [0.2, -0.4, 0.1, 0.3]),
                ("kasner", fx.kasner(*KASNER_P), None, [1.3, 0.1, -0.2, 0.3]),
                ("schwarzschild", fx.schwarzschild(1.0), None, [0.0, 4.0, 1.1, 0.3])]
    for name, frame, metric, p in fd_cases:
        curv = curvature_two_forms(frame, solve_spin_connection(frame, mode="fd", fd_step=1e-3))
        oracle = coordinate_riemann_oracle(metric or frame.metric(), mode="fd", fd_step=1e-3)
        out.append(bound(f"{name}.finite_difference", sup(curv.frame(p) - oracle.in_frame(frame, p)), 1e-4, ORACLE))
    out.append(bound("runtime_s", time.perf_counter() - start, 60.0, "wall clock"))
    return out


def worked_examples() -> list[Check]:
    p = np.array(KASNER_P)
    curv = curvature_two_forms(fx.kasner(*KASNER_P))
    errs = []
    for t in (0.5, 1.0, 2.0, 7.0):
        r = curv.frame([t, 0.1, 0.2, 0.3])
        errs += [abs(r[i, j, i, j] - p[i - 1] * p[j - 1] / t**2) for i, j in ((1, 2), (1, 3), (2, 3))]
    out = [bound("kasner.two_form_coefficients", max(errs), 1e-8, FORMULA),
           Check("kasner.R^1_212(t=2)", float(curv.frame([2.0, 0, 0, 0])[1, 2, 1, 2]), 1 / 9, 1e-8, FORMULA)]

    theta = solve_spin_connection(fx.schwarzschild(1.0))
    errs = []
    for t, r, th, ph in schwarzschild_points(np.random.default_rng(5), 10):
        alpha = 0.5 * np.log(1 - 2 / r)
        w = theta.frame_legs([t, r, th, ph])
        expected = {(0, 1, 0): np.exp(alpha) / (r * (r - 2.0)), (2, 1, 2): np.exp(alpha) / r,
                    (3, 2, 3): np.cos(th) / (np.sin(th) * r), (3, 1, 3): np.exp(alpha) / r}
        errs += [abs(w[k] - v) for k, v in expected.items()]
    out.append(bound("schwarzschild.spin_connection_x10", max(errs), 1e-8, FORMULA))
    return out


def vacuum_identities() -> list[Check]:
    rng = np.random.default_rng(21)
    out = []
    for name, frame, pts in [("kasner", fx.kasner(*KASNER_P), kasner_points(rng, 5)),
                             ("schwarzschild", fx.schwarzschild(1.0), schwarzschild_points(rng, 5))]:
        curv = curvature_two_forms(frame)
        con = contract_curvature(curv)
        out.append(bound(f"{name}.ricci", max(sup(con.ricci(p)) for p in pts), 1e-6, FORMULA))
        out.append(bound(f"{name}.first_bianchi", max(sup(curv.first_bianchi(p)) for p in pts), 1e-8, FORMULA))
        out.append(bound(f"{name}.contracted_second_bianchi", max(sup(curv.contracted_bianchi(p)) for p in pts),
                         1e-4, FORMULA))
    for name, frame, p in [("perturbed_flat_5", fx.perturbed_flat(5), [0.1] * 4),
                           ("equivariant", fx.equivariant("0.2*r", "0.1*t*r"), [0.3, 1.2, 0.5])]:
        out.append(bound(f"{name}.first_bianchi", sup(curvature_two_forms(frame).first_bianchi(p)), 1e-8, FORMULA))
    return out


def penrose_residual() -> list[Check]:
    out = []
    for name, frame, p, steps in [("kasner", fx.kasner(*KASNER_P), [1.5, 0, 0, 0], (0.1, 0.05)),
                                  ("schwarzschild", fx.schwarzschild(1.0), [0.0, 4.0, np.pi / 2, 0.0], (0.2, 0.1))]:
        curv = curvature_two_forms(frame)
        out.append(bound(f"{name}.residual(h=1e-3)", sup(penrose_wave_residual(curv, p, 1e-3)), 1e-3, FORMULA))
        coarse, fine = (sup(penrose_wave_residual(curv, p, h)) for h in steps)
        out.append(at_least(f"{name}.order", order(coarse, fine), 2.0, FORMULA, f"steps {steps}"))
    return out


def _unit_timelike(rng):
    v = rng.uniform(-1, 1, 3)
    v *= rng.uniform(0, 0.95) / np.linalg.norm(v)
    return np.concatenate([[1.0], v]) / np.sqrt(1 - v @ v)


def bel_robinson_checks() -> list[Check]:
    rng = np.random.default_rng(31)
    out = []
    cases = [("kasner", fx.kasner(*KASNER_P), lambda n: kasner_points(rng, n), [1.2, 0, 0, 0], (0.1, 0.05)),
             ("schwarzschild", fx.schwarzschild(1.0), lambda n: schwarzschild_points(rng, n),
              [0.0, 4.0, 1.2, 0.3], (0.2, 0.1))]
    for name, frame, points, p0, steps in cases:
        q = bel_robinson(weyl_tensor(curvature_two_forms(frame)))
        pts = points(100)
        out.append(bound(f"{name}.symmetry_defect", max(q.symmetry_defect(p) for p in pts[:5]), 1e-8, FORMULA))
        energies = []
        for p in pts:
            T = _unit_timelike(rng)
            energies.append(np.einsum("abcd,a,b,c,d->", q.frame(p), T, T, T, T))
        out.append(at_least(f"{name}.Q(T,T,T,T)_min_x100", min(energies), 0.0, FORMULA))
        out.append(bound(f"{name}.divergence(h=1e-3)", max(sup(divergence_bel_robinson(q, p, 1e-3)) for p in pts[:2]),
                         1e-4, FORMULA))
        coarse, fine = (sup(q.divergence(p0, h)) for h in steps)
        out.append(at_least(f"{name}.divergence_order", order(coarse, fine), 2.0, FORMULA, f"steps {steps}"))
    return out


def _gauge_shifted(kk: KKData) -> KKData:
    def lam(x, c):
        t, x1, x2 = x
        return jnp.stack([jnp.sin(x1 * x2), t * t * x1, jnp.cos(t + x2), x1 * x2 * x2, jnp.exp(0.3 * t)]) @ c

    dlam = jax.grad(lam)

    def shifted_A(x, c):
        return kk.A_fn(x, ()) + dlam(x, c)

    return KKData(kk.chart3, kk.metric_fn, kk.gamma_fn, shifted_A, jnp.zeros(5), False)


def reduction_consistency() -> list[Check]:
    out = []
    for kind, kk in [("polarized", curved_kk(A=None)), ("general", curved_kk())]:
        frame = assemble_kk_coframe(kk)
        curv = curvature_two_forms(frame)
        block_err, proj_err, scalar_err = 0.0, 0.0, 0.0
        for x in (np.array([0.3, -0.4, 0.5]), np.array([-1.1, 0.8, 0.2]), np.array([0.6, 0.1, -0.9])):
            x4 = np.append(x, 0.7)
            block_err = max(block_err, sup(assemble_riemann(reduced_riemann(kk, x)) - curv.lowered(x4)))
            direct = project_4d_ricci(kk, contract_curvature(curv).ricci_frame(x4), x)
            reduced = ricci_projections(kk, x)
            proj_err = max(proj_err, *(sup(reduced[k] - direct[k]) for k in ("horizontal", "mixed", "fibre")))
            scalar_err = max(scalar_err, abs(reduced_scalar_curvature(kk, x) - contract_curvature(curv).scalar(x4)))
        out += [bound(f"{kind}.riemann_blocks", block_err, 1e-5, ORACLE),
                bound(f"{kind}.ricci_projections", proj_err, 1e-5, ORACLE),
                bound(f"{kind}.scalar_curvature", scalar_err, 1e-5, ORACLE)]
    base = curved_kk()
    template = _gauge_shifted(base)
    x = np.array([0.4, -0.3, 0.2])
    a, pa = reduced_riemann(base, x), ricci_projections(base, x)
    worst = 0.0
    for c in np.random.default_rng(41).uniform(-1, 1, (4, 5)):
        shifted = replace(template, params=jnp.asarray(c))
        b, pb = reduced_riemann(shifted, x), ricci_projections(shifted, x)
        worst = max(worst, *(sup(b[k] - a[k]) for k in a), *(sup(pb[k] - pa[k]) for k in ("horizontal", "mixed", "fibre")))
    out.append(bound("gauge_invariance", worst, 1e-8, FORMULA, "A -> A + d(lambda), 4 random lambda"))
    return out


def twist_checks() -> list[Check]:
    out = []
    cases = [("constant_field", KKData.from_expressions(KK_CHART, "0", ["0", "0", "0.8*x1"])),
             ("null_wave", KKData.from_expressions(KK_CHART, "0", ["0", "0", "sin(x1 - t)"]))]
    for name, kk in cases:
        tw = twist_potential(kk, [0, 0, 0], samples=[[0.3, 0.2, 0.1], [1.0, -1.0, 0.5]])
        pts = [[1.2, -0.7, 0.9], [-1.5, 1.5, -1.0], [0.4, 0.3, -0.2]]
        out.append(bound(f"{name}.path_independence", max(tw.path_residual(p) for p in pts), 1e-10, FORMULA))
        out.append(bound(f"{name}.d_omega_minus_G", max(sup(tw.exactness_residual(p)) for p in pts), 1e-8, FORMULA))
    bad = KKData.from_expressions(KK_CHART, "0", ["0", "0", "x1*x1*t"])
    try:
        twist_potential(bad, [0.5, 0.5, 0.5])
        raised, detail = 0.0, "no error"
    except NonIntegrableError as err:
        raised, detail = 1.0, f"residual {err.residual:.3g}"
    out.append(Check("non_closed_G.raises", raised, 1.0, 0.0, FORMULA, "abs", detail))
    return out


def constraint_checks() -> list[Check]:
    start = time.perf_counter()
    out = []
    h_err, ha_err = 0.0, 0.0
    for p in (KASNER_P, (-1 / 3, 2 / 3, 2 / 3)):
        for t in (0.5, 1.0, 3.0):
            s, _ = kasner_slice(*p, t)
            h_err = max(h_err, sup(hamiltonian_constraint(s)))
            ha_err = max(ha_err, sup(momentum_constraint(s)))
    out += [bound("kasner.hamiltonian", h_err, 1e-6, FORMULA), bound("kasner.momentum", ha_err, 1e-6, FORMULA)]

    runs = {}
    spatial = []
    for n in (32, 64):
        s = synthetic_state(n, twist=True)
        gauge = wavy_gauge(s.grid)
        runs[n] = (s, gauge)
        spatial.append(constraint_propagation_check(s, gauge, 1e-4, "central")["mismatch"])
    out.append(at_least("propagation.order_h", order(*spatial), 3.0, ORACLE, "grids 32, 64"))
    s, gauge = runs[64]
    ref = constraint_propagation_check(s, gauge, 1e-5, "central")
    temporal = []
    for dt in (1e-3, 5e-4):
        r = constraint_propagation_check(s, gauge, dt)
        temporal.append(max(sup(r["lhs_H"] - ref["lhs_H"]), sup(r["lhs_Ha"] - ref["lhs_Ha"])))
    out.append(at_least("propagation.order_dt", order(*temporal), 1.0, ORACLE, "dt 1e-3, 5e-4 on 64^2"))
    out.append(bound("runtime_s", time.perf_counter() - start, 120.0, "wall clock"))
    return out


def weyl_checks() -> list[Check]:
    out = []
    s = synthetic_state(32).replace(pi=np.zeros((2, 2)), p_gamma=0.0)
    w = weyl_adm(s)
    out.append(Check("time_symmetric.B_exact_zero", max(sup(w.B_ab), sup(w.B_3a), sup(w.B_33)), 0.0, 0.0,
                     "structural", "abs"))
    e_err, b_err = 0.0, 0.0
    for p in (KASNER_P, (-1 / 3, 2 / 3, 2 / 3)):
        frame_weyl = weyl_tensor(curvature_two_forms(fx.kasner(*p)))
        for t in (1.0, 2.0):
            s, _ = kasner_slice(*p, t)
            w = weyl_adm(s)
            W = frame_weyl.frame([t, 0.0, 0.0, 0.0])
            qbar = np.array([t ** (2 * p[0]), t ** (2 * p[1]), t ** (2 * p[2])])
            vol = np.sqrt(qbar.prod())
            e_err = max(e_err, abs(w.E_ab[0, 0, 0, 0] - vol * W[0, 1, 0, 1] / qbar[0]),
                        abs(w.E_ab[1, 1, 0, 0] - vol * W[0, 2, 0, 2] / qbar[1]),
                        abs(w.E_33[0, 0] - vol * W[0, 3, 0, 3] * qbar[2]), sup(w.E_ab[0, 1]), sup(w.E_3a))
            b_err = max(b_err, sup(w.B_ab), sup(w.B_3a), sup(w.B_33))
    out += [bound("kasner.E_vs_frame_weyl", e_err, 1e-5, ORACLE), bound("kasner.B", b_err, 1e-8, FORMULA)]
    lows = []
    for state in (synthetic_state(32), synthetic_state(32, kk=True), synthetic_state(32, twist=True),
                  kasner_slice(*KASNER_P, 1.5)[0]):
        w = weyl_adm(state)
        lows += [float(np.min(bel_robinson_density(w, state))),
                 float(np.min(bel_robinson_density(w, state, densitized=True)))]
    out.append(at_least("bel_robinson_density_min", min(lows), 0.0, FORMULA))
    return out


def wave_checks() -> list[Check]:
    start = time.perf_counter()
    out = []
    x3, x2 = np.array([0.1, 0.2, 0.3]), np.array([0.1, 0.2])
    k = np.array([1.0, 1.0, 1.0])
    out.append(bound("plane_wave_3d", abs(kirchhoff_3d(plane_wave_data(k), x3, 0.7) - np.sin(k @ x3 - np.sqrt(3) * 0.7)),
                     1e-8, FORMULA))
    out.append(bound("unit_velocity_3d", abs(kirchhoff_3d(CauchyData(3, u1=lambda Y: 1.0), x3, 0.7) - 0.7),
                     1e-10, FORMULA))
    out.append(bound("unit_velocity_2d", abs(descent_2d(CauchyData(2, u1=lambda Y: 1.0), x2, 1.3) - 1.3),
                     1e-10, FORMULA))
    data = CauchyData(2, lambda Y: np.exp(-np.sum(Y**2, -1)) * np.cos(Y[..., 0]),
                      lambda Y: np.sin(Y[..., 1]) / (1 + np.sum(Y**2, -1)))
    worst = 0.0
    for t in (0.3, 1.0, 2.0):
        u2 = descent_2d(data, [0.2, -0.1], t)
        worst = max(worst, *(abs(kirchhoff_3d(data.lifted(), [0.2, -0.1, z], t) - u2) for z in (0.0, 0.7, -3.0)))
    out.append(bound("descent_identity", worst, 1e-8, ORACLE))
    probe = huygens_probe(lambda Y: 0.0, smooth_bump(1.0), 1.0, [0.0, 0.0], 5.0)
    out.append(bound("huygens.interior_3d", abs(probe["u3d"]), 1e-10, FORMULA))
    out.append(at_least("huygens.tail_2d", probe["u2d"], 1e-3, FORMULA))
    for dim in (2, 3):
        res = duhamel_solve(CauchyData(dim, source=lambda Y, s: 1.0), x3[:dim], 0.8)
        out.append(bound(f"duhamel.unit_source_{dim}d", abs(res.value - 0.32), 1e-8, FORMULA))
    p0, g0 = radial_gaussian(0.6)
    p1, g1 = radial_gaussian(0.3)
    cubic = CauchyData(3, g0, g1, nonlinearity=lambda u: -u**3, center=np.zeros(3))
    x = np.array([0.2, 0.1, 0.0])
    res = duhamel_solve(cubic, x, 0.5)
    ref = radial_fdtd(p0, p1, 0.5, np.linalg.norm(x), lambda u: -u**3)[0]
    out.append(bound("picard_vs_fdtd", abs(res.value - ref), 1e-3, ORACLE,
                     f"nonlinear shift {abs(res.value - res.linear):.3g}"))
    out.append(bound("runtime_s", time.perf_counter() - start, 60.0, "wall clock"))
    return out


def quasi_local_checks() -> list[Check]:
    out = []
    rng = np.random.default_rng(7)
    F = rng.normal(size=(4, 4))
    F = F - F.T
    x = np.array([0.4, -0.3, 0.2, 0.7])
    theta = cronstrom_connection(RadialField(lambda y: F), x)
    out.append(bound("cronstrom.constant_F", sup(theta + 0.5 * F @ x), 1e-12, FORMULA))
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    forms = optical_killing_forms(OpticalFrame(fx.minkowski().metric(), mode="fd"), [0.3, 0.1, -0.2, 0.4])
    # the optical function is quadratic, so the stencils are exact up to rounding
    out += [bound("minkowski.K_minus_4eta", sup(forms["K"] - 4 * eta), 1e-8, FORMULA, "finite differences"),
            bound("minkowski.CK", sup(forms["CK"]), 1e-8, FORMULA, "finite differences"),
            bound("minkowski.box_minus_8", abs(forms["box_f"] - 8.0), 1e-8, FORMULA, "finite differences")]
    of = OpticalFrame(gauss_lemma_metric(0.05))
    direction = np.array([0.5, 0.3, -0.6, 0.4])
    radii = 2.0 ** -np.arange(1, 7)
    norms = [np.linalg.norm(optical_killing_forms(of, r * direction)["CK"]) for r in radii]
    out.append(Check("CK_scaling_exponent", scaling_exponent(radii, norms), 2.0, 0.1, FORMULA, "abs",
                     "dyadic radii 2^-1 .. 2^-6"))
    return out


# -- registry -------------------------------------------------------------------


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    run: Callable[[], list[Check]]


CRITERIA = (
    Criterion(1, "cartan_vs_oracle", cartan_vs_oracle),
    Criterion(2, "worked_examples", worked_examples),
    Criterion(3, "vacuum_identities", vacuum_identities),
    Criterion(4, "penrose_residual", penrose_residual),
    Criterion(5, "bel_robinson", bel_robinson_checks),
    Criterion(6, "reduction_consistency", reduction_consistency),
    Criterion(7, "twist", twist_checks),
    Criterion(8, "constraints", constraint_checks),
    Criterion(9, "weyl_electric_magnetic", weyl_checks),
    Criterion(10, "wave_kernels", wave_checks),
    Criterion(11, "quasi_local", quasi_local_checks),
)


def run_criterion(c: Criterion) -> list[Check]:
    prefix = f"c{c.number:02d}.{c.name}"
    try:
        checks = c.run()
    except Exception as err:  # aggregated per criterion, never fatal for the suite
        return [Check.failed(prefix, err)]
    return [replace(chk, name=f"{prefix}.{chk.name}") for chk in checks]


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{THREADS_ENV}: expected a positive integer, got {raw!r}")
    return n


def select(numbers=None) -> list[Criterion]:
    if not numbers:
        return list(CRITERIA)
    known = {c.number: c for c in CRITERIA}
    missing = [n for n in numbers if n not in known]
    if missing:
        raise ValueError(f"criteria: unknown numbers {missing}, expected 1..{len(CRITERIA)}")
    return [known[n] for n in sorted(set(numbers))]


def run_suite(numbers=None, threads: int | None = None) -> list[Check]:
    """Run the selected criteria, in parallel when asked, merging results in criterion order."""
    chosen = select(numbers)
    threads = threads or thread_count()
    if threads == 1:
        results = [run_criterion(c) for c in chosen]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_criterion, chosen))
    return [chk for batch in results for chk in batch]
