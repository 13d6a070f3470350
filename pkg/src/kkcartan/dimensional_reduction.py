"""Kaluza-Klein reduction of spacetimes with a spacelike translation symmetry.

The 4-metric is written as ``gbar = gt + e^{2 gamma} (dx3 + A)^2`` with the
orbit metric ``gt``, the scalar ``gamma`` and the one-form ``A`` living on a
2+1 chart.  Two metrics appear on the orbit space and each function says which
one it uses:

* ``gt`` ("tilde"): the metric in the ansatz above; curvature blocks, Ricci
  projections and the twist form are written with it.
* ``g = e^{2 gamma} gt``: the conformally rescaled metric on which vacuum
  gravity becomes an Einstein-wave-map system.

Frame indices 0..2 refer to an orthonormal triad of ``gt`` (LDL split, timelike
first leg), index 3 to the fibre leg ``e^3 = e^gamma (dx3 + A)``.  In that frame
every curvature block depends on ``A`` only through ``F = dA``.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
from scipy.special import roots_legendre

from .cartan_curvature import _pipeline, christoffel_symbols
from .errors import GeometryError, NonIntegrableError
from .expressions import Expression
from .frame_algebra import DET_TOL, Chart, CoFrame, _ldl_matrix_fn, ldl_coframe_matrix, levi_civita_symbol

FIBRE_BOX = (-10.0, 10.0)


def _zero_form(x, p):
    return jnp.zeros(3) + 0.0 * x[0]


@dataclass(frozen=True)
class KKData:
    """Orbit-space data of a U(1)-symmetric 4-metric.

    ``metric_fn(x, p) -> (3, 3)``, ``gamma_fn(x, p) -> scalar`` and
    ``A_fn(x, p) -> (3,)`` are jax-traceable point functions sharing ``params``.
    """

    chart3: Chart
    metric_fn: Callable
    gamma_fn: Callable
    A_fn: Callable = _zero_form
    params: object = ()
    polarized: bool = field(default=None)

    def __post_init__(self):
        if self.chart3.dim != 3 or not self.chart3.lorentzian:
            raise GeometryError("KK data lives on a Lorentzian 2+1 chart")
        if self.polarized is None:
            object.__setattr__(self, "polarized", self.A_fn is _zero_form)

    @classmethod
    def from_expressions(cls, chart3: Chart, gamma: str, A=None, metric=None, parameters=None) -> "KKData":
        """Build from expression strings; ``metric`` defaults to 2+1 Minkowski."""
        names = chart3.coord_names
        ex_gamma = Expression(gamma, names, parameters)
        metric = metric or [["-1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]]
        ex_g = [[Expression(str(metric[min(i, j)][max(i, j)]), names, parameters) for j in range(3)]
                for i in range(3)]

        def metric_fn(x, p):
            return jnp.stack([jnp.stack([ex_g[i][j].at_point(x) + 0.0 * x[0] for j in range(3)]) for i in range(3)])

        def gamma_fn(x, p):
            return ex_gamma.at_point(x) + 0.0 * x[0]

        if A is None or all(str(a).strip() in ("0", "0.0") for a in A):
            return cls(chart3, metric_fn, gamma_fn, _zero_form, (), True)
        ex_A = [Expression(str(a), names, parameters) for a in A]

        def A_fn(x, p):
            return jnp.stack([a.at_point(x) + 0.0 * x[0] for a in ex_A])

        return cls(chart3, metric_fn, gamma_fn, A_fn, (), False)

    def gauge_shifted(self, lam: Callable) -> "KKData":
        """Same geometry with ``A -> A + d lam`` (``lam(x) -> scalar``, traceable)."""
        base, dlam = self.A_fn, jax.grad(lam)
        return replace(self, A_fn=lambda x, p: base(x, p) + dlam(x), polarized=False)

    def chart4(self) -> Chart:
        c = self.chart3
        return Chart(c.coord_names + ("x3",), c.signature + (1,), c.domain_box + (FIBRE_BOX,))

    def check(self, x) -> np.ndarray:
        x = self.chart3.require(x)
        g = np.asarray(self.metric_fn(jnp.asarray(x), self.params))
        det = np.linalg.det(g)
        if not np.isfinite(det) or abs(det) <= DET_TOL:
            raise GeometryError(f"orbit metric is degenerate at {x.tolist()}")
        _, d = ldl_coframe_matrix(jnp.asarray(g))
        if np.any(np.sign(np.asarray(d)) != np.asarray(self.chart3.signature)):
            raise GeometryError(f"orbit metric at {x.tolist()} is not Lorentzian in chart order")
        gam = float(self.gamma_fn(jnp.asarray(x), self.params))
        if not np.isfinite(gam):
            raise GeometryError(f"gamma is not finite at {x.tolist()}")
        return x


# ---------------------------------------------------------------------------
# assembled 4D coframe


@functools.lru_cache(maxsize=None)
def _kk_matrix_fn(metric_fn, gamma_fn, A_fn):
    triad = _ldl_matrix_fn(metric_fn)

    def matrix(x4, p):
        x = x4[:3]
        e3 = triad(x, p)
        eg = jnp.exp(gamma_fn(x, p))
        top = jnp.concatenate([e3, jnp.zeros((3, 1))], axis=1)
        bottom = jnp.concatenate([eg * A_fn(x, p), eg[None]])[None, :]
        return jnp.concatenate([top, bottom], axis=0)

    return matrix


def assemble_kk_coframe(kk: KKData) -> CoFrame:
    """``{e^a of gt, e^gamma (dx3 + A)}`` on the 4D chart ``(t, x1, x2, x3)``."""
    frame = CoFrame(kk.chart4(), _kk_matrix_fn(kk.metric_fn, kk.gamma_fn, kk.A_fn), kk.params,
                    name="kaluza-klein")
    frame.signature_check = lambda x4: kk.check(np.asarray(x4)[:3])
    return frame


def kk_metric(kk: KKData, x4) -> np.ndarray:
    """``gbar`` assembled directly from the ansatz (independent of the coframe)."""
    x = jnp.asarray(np.asarray(x4, dtype=float)[:3])
    g = np.asarray(kk.metric_fn(x, kk.params))
    a = np.asarray(kk.A_fn(x, kk.params))
    w = np.exp(2 * float(kk.gamma_fn(x, kk.params)))
    a4 = np.concatenate([a, [1.0]])
    out = w * np.outer(a4, a4)
    out[:3, :3] += g
    return out


# ---------------------------------------------------------------------------
# orbit-space ingredients


class _Reduction:
    """Compiled reduced-curvature formulas for one KK family."""

    def __init__(self, metric_fn, gamma_fn, A_fn, polarized):
        eta = jnp.diag(jnp.array([-1.0, 1.0, 1.0]))
        triad_pipe = _pipeline(_ldl_matrix_fn(metric_fn), (-1, 1, 1), "ad", 0.0, True)
        E, V = triad_pipe.raw["E"], triad_pipe.raw["V"]
        riem3 = triad_pipe.raw["riem"]
        dgam = jax.grad(gamma_fn)
        dmetric = jax.jacfwd(metric_fn)

        def christoffel(x, p):
            return christoffel_symbols(metric_fn(x, p), dmetric(x, p))

        def hessian(x, p):
            # coordinate nabla_m nabla_n gamma of gt
            return jax.hessian(gamma_fn)(x, p) - jnp.einsum("lmn,l->mn", christoffel(x, p), dgam(x, p))

        def faraday(x, p):
            dA = jax.jacfwd(A_fn)(x, p)  # dA[n, m] = d_m A_n
            return dA.T - dA  # F_mn = d_m A_n - d_n A_m

        def grad_faraday(x, p):
            G, f = christoffel(x, p), faraday(x, p)
            df = jax.jacfwd(faraday)(x, p)  # [m, n, r] = d_r F_mn
            return df - jnp.einsum("lrm,ln->mnr", G, f) - jnp.einsum("lrn,ml->mnr", G, f)

        def pieces(x, p):
            v = V(x, p)
            gam = gamma_fn(x, p)
            ga = dgam(x, p) @ v  # frame gradient gamma_a
            H = v.T @ hessian(x, p) @ v
            if polarized:
                F = jnp.zeros((3, 3))
                DF = jnp.zeros((3, 3, 3))
            else:
                F = v.T @ faraday(x, p) @ v
                DF = jnp.einsum("mnr,ma,nb,rc->abc", grad_faraday(x, p), v, v, v)  # nabla_c F_ab
            return dict(gamma=gam, ga=ga, H=H, F=F, DF=DF, R3=riem3(x, p), E=E(x, p), V=v)

        def blocks(x, p):
            q = pieces(x, p)
            ga, H, F, DF = q["ga"], q["H"], q["F"], q["DF"]
            w = jnp.exp(q["gamma"])
            F_up = eta @ F  # F^a_b
            F_mixed = F @ eta  # F_c^b
            fibre = -H - jnp.outer(ga, ga) + 0.25 * w**2 * F @ F_mixed.T  # R^3_{a3c}
            cross = w * (jnp.einsum("a,cd->acd", ga, F) + 0.5 * jnp.einsum("cda->acd", DF)
                         + 0.5 * jnp.einsum("c,ad->acd", ga, F) - 0.5 * jnp.einsum("d,ac->acd", ga, F))  # R^3_{acd}
            pure = q["R3"] - 0.25 * w**2 * (2 * jnp.einsum("ab,cd->abcd", F_up, F)
                                            + jnp.einsum("ac,bd->abcd", F_up, F)
                                            - jnp.einsum("ad,bc->abcd", F_up, F))  # R^a_{bcd}
            return dict(pure=pure, cross=cross, fibre=fibre)

        def ricci(x, p):
            q = pieces(x, p)
            ga, H, F, DF = q["ga"], q["H"], q["F"], q["DF"]
            w = jnp.exp(q["gamma"])
            ric3 = jnp.einsum("abad->bd", q["R3"])
            FF = F @ eta @ F.T  # F_ac F_b^c
            horizontal = ric3 - H - jnp.outer(ga, ga) - 0.5 * w**2 * FF
            # 1/2 e^{-2 gamma} nabla^c (e^{3 gamma} F_ac), frame components
            mixed = 0.5 * w * (3 * jnp.einsum("c,ac,cc->a", ga, F, eta) + jnp.einsum("acc,cc->a", DF, eta))
            box = jnp.einsum("aa,aa->", eta, H)
            grad2 = ga @ eta @ ga
            f2 = jnp.einsum("ab,ab,aa,bb->", F, F, eta, eta)
            fibre = -box - grad2 + 0.25 * w**2 * f2
            scal3 = jnp.einsum("bd,bd->", eta, ric3)
            scalar = scal3 - 2 * box - 2 * grad2 - 0.25 * w**2 * f2
            return dict(horizontal=horizontal, mixed=mixed, fibre=fibre, scalar=scalar, E=q["E"], gamma=q["gamma"])

        def twist_form(x, p):
            g = metric_fn(x, p)
            ginv = jnp.linalg.inv(g)
            f_up = ginv @ faraday(x, p) @ ginv
            vol = jnp.sqrt(jnp.abs(jnp.linalg.det(g)))
            return jnp.exp(3 * gamma_fn(x, p)) * vol * 0.5 * jnp.einsum("ab,abm->m", f_up, _EPS3)

        def twist_curl(x, p):
            d = jax.jacfwd(twist_form)(x, p)  # d[m, n] = d_n G_m
            return d.T - d

        self.fns = {k: jax.jit(v) for k, v in dict(blocks=blocks, ricci=ricci, twist_form=twist_form,
                                                   twist_curl=twist_curl, faraday=faraday).items()}
        self.twist_many = jax.jit(jax.vmap(twist_form, in_axes=(0, None)))


_EPS3 = jnp.asarray(levi_civita_symbol(3))


@functools.lru_cache(maxsize=None)
def _reduction(metric_fn, gamma_fn, A_fn, polarized) -> _Reduction:
    return _Reduction(metric_fn, gamma_fn, A_fn, polarized)


def _run(kk: KKData, name: str, x):
    x = kk.check(x)
    red = _reduction(kk.metric_fn, kk.gamma_fn, kk.A_fn, kk.polarized)
    out = red.fns[name](jnp.asarray(x), kk.params)
    return jax.tree_util.tree_map(lambda a: np.asarray(a, dtype=float), out)


# ---------------------------------------------------------------------------
# public operations


def reduced_riemann(kk: KKData, x) -> dict:
    """Riemann blocks of ``gbar`` in the KK orthonormal frame at the orbit point ``x``.

    ``pure[a, b, c, d] = R^a_{bcd}``, ``cross[a, c, d] = R^3_{acd}`` and
    ``fibre[a, c] = R^3_{a3c}`` (all indices 0..2 horizontal).
    """
    return _run(kk, "blocks", x)


def assemble_riemann(blocks: dict) -> np.ndarray:
    """All-lower 4D frame Riemann tensor from the reduced blocks (fibre index 3)."""
    eta = np.diag([-1.0, 1.0, 1.0])
    R = np.zeros((4, 4, 4, 4))
    R[:3, :3, :3, :3] = np.einsum("ae,ebcd->abcd", eta, blocks["pure"])
    cross, fib = blocks["cross"], blocks["fibre"]
    for a, c, d in itertools.product(range(3), repeat=3):
        v = cross[a, c, d]
        R[3, a, c, d], R[a, 3, c, d] = v, -v
        R[c, d, 3, a], R[c, d, a, 3] = v, -v
    for a, c in itertools.product(range(3), repeat=2):
        v = fib[a, c]
        R[3, a, 3, c], R[a, 3, c, 3] = v, v
        R[a, 3, 3, c], R[3, a, c, 3] = -v, -v
    return R


def ricci_projections(kk: KKData, x) -> dict:
    """``Ric(gbar)`` on horizontal lifts ``h_mu = d_mu - A_mu d_3`` and on ``d_3``.

    Returns coordinate components ``horizontal[mu, nu] = Ric(h_mu, h_nu)``,
    ``mixed[mu] = Ric(h_mu, d_3)`` and ``fibre = Ric(d_3, d_3)``, together with
    the frame versions (``*_frame``).  All are built from ``gt``-covariant
    derivatives and ``F`` only.
    """
    r = _run(kk, "ricci", x)
    e, w = r["E"], np.exp(r["gamma"])
    return {
        "horizontal": e.T @ r["horizontal"] @ e,
        "mixed": w * e.T @ r["mixed"],
        "fibre": float(w**2 * r["fibre"]),
        "horizontal_frame": r["horizontal"],
        "mixed_frame": r["mixed"],
        "fibre_frame": float(r["fibre"]),
    }


def reduced_scalar_curvature(kk: KKData, x) -> float:
    """``Scal(gt) - 2 box gamma - 2 |d gamma|^2 - (1/4) e^{2 gamma} F^2``, all with ``gt``."""
    return float(_run(kk, "ricci", x)["scalar"])


def project_4d_ricci(kk: KKData, ricci_frame4: np.ndarray, x) -> dict:
    """Convert a 4D frame Ricci tensor (KK frame) to the projections above."""
    e = np.asarray(_ldl_matrix_fn(kk.metric_fn)(jnp.asarray(np.asarray(x)[:3], dtype=float), kk.params))
    w = np.exp(float(kk.gamma_fn(jnp.asarray(np.asarray(x)[:3], dtype=float), kk.params)))
    r = ricci_frame4
    return {"horizontal": e.T @ r[:3, :3] @ e, "mixed": w * e.T @ r[:3, 3], "fibre": float(w**2 * r[3, 3])}


# ---------------------------------------------------------------------------
# twist potential


class TwistData:
    """Twist one-form ``G = e^{3 gamma} *F`` (Hodge dual of ``gt``) and its potential.

    ``omega(x)`` integrates ``G`` along an axis-parallel staircase from the
    base point, with Gauss-Legendre quadrature on every leg.
    """

    def __init__(self, kk: KKData, base_point, nodes: int = 32, order=(0, 1, 2)):
        self.kk = kk
        self.base = kk.check(base_point)
        self.nodes = nodes
        self.order = tuple(order)
        self._red = _reduction(kk.metric_fn, kk.gamma_fn, kk.A_fn, kk.polarized)
        s, w = roots_legendre(nodes)
        self._s, self._w = (s + 1) / 2, w / 2

    def faraday(self, x) -> np.ndarray:
        return _run(self.kk, "faraday", x)

    def G(self, x) -> np.ndarray:
        if self.kk.polarized:
            self.kk.check(x)
            return np.zeros(3)
        return _run(self.kk, "twist_form", x)

    def curl(self, x) -> np.ndarray:
        """Components of ``dG``; zero where the reduced vacuum equation holds."""
        if self.kk.polarized:
            self.kk.check(x)
            return np.zeros((3, 3))
        return _run(self.kk, "twist_curl", x)

    def integrate(self, x, order=None) -> float:
        x = self.kk.check(x)
        if self.kk.polarized:
            return 0.0
        order = self.order if order is None else tuple(order)
        cur = self.base.copy()
        total = 0.0
        for mu in order:
            length = x[mu] - cur[mu]
            if length != 0.0:
                pts = np.repeat(cur[None, :], self.nodes, axis=0)
                pts[:, mu] = cur[mu] + self._s * length
                g = np.asarray(self._red.twist_many(jnp.asarray(pts), self.kk.params))[:, mu]
                total += length * float(self._w @ g)
            cur[mu] = x[mu]
        return total

    def omega(self, x) -> float:
        return self.integrate(x)

    def path_residual(self, x) -> float:
        """Spread of ``omega(x)`` over all six staircase orderings."""
        vals = [self.integrate(x, perm) for perm in itertools.permutations(range(3))]
        return float(max(vals) - min(vals))

    def exactness_residual(self, x, step: float = 1e-2) -> np.ndarray:
        """``d omega - G`` with ``d omega`` by fourth-order differences of the quadrature."""
        x = self.kk.check(x)
        h = self.kk.chart3.fit_step(x, step)
        grad = np.zeros(3)
        for mu in range(3):
            e = np.zeros(3)
            e[mu] = h
            vals = [self.integrate(x + k * e) for k in (-2, -1, 1, 2)]
            grad[mu] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
        return grad - self.G(x)


def twist_potential(kk: KKData, base_point, samples=None, tol: float = 1e-8, nodes: int = 32) -> TwistData:
    """Twist data with a closure check of ``G`` at ``samples`` (default: base point)."""
    data = TwistData(kk, base_point, nodes)
    pts = [base_point] if samples is None else samples
    worst = max(float(np.max(np.abs(data.curl(p)))) for p in pts)
    if worst > tol:
        raise NonIntegrableError("twist form is not closed, so no potential exists", worst)
    return data


# ---------------------------------------------------------------------------
# Einstein-wave-map system on (M, g)


def wavemap_residuals(metric_fn: Callable, gamma_fn: Callable, omega_fn: Callable, x, params=()) -> dict:
    """Wave-map and Einstein residuals on ``(M, g)`` with target ``4 dgamma^2 + e^{-4 gamma} domega^2``.

    ``metric_fn`` is the conformal metric ``g``.  Returns ``r_gamma``,
    ``r_omega``, the stress tensor ``T``, the Einstein tensor ``E`` of ``g`` (via
    the Cartan pipeline) and ``mismatch = E - T / 2``; the factor ``1/2`` is the
    coupling implied by vacuum gravity for this target normalisation.
    """
    x = jnp.asarray(np.asarray(x, dtype=float))
    fns = _wavemap(metric_fn, gamma_fn, omega_fn)
    out = {k: np.asarray(v, dtype=float) for k, v in fns(x, params).items()}
    out["r_gamma"] = float(out["r_gamma"])
    out["r_omega"] = float(out["r_omega"])
    return out


@functools.lru_cache(maxsize=None)
def _wavemap(metric_fn, gamma_fn, omega_fn):
    pipe = _pipeline(_ldl_matrix_fn(metric_fn), (-1, 1, 1), "ad", 0.0, True)
    ric_frame, E = pipe.raw["ricci_frame"], pipe.raw["E"]

    def box(f):
        def b(x, p):
            g = metric_fn(x, p)
            ginv = jnp.linalg.inv(g)
            root = lambda y: jnp.sqrt(jnp.abs(jnp.linalg.det(metric_fn(y, p))))  # noqa: E731
            flux = lambda y: root(y) * jnp.linalg.inv(metric_fn(y, p)) @ jax.grad(f)(y, p)  # noqa: E731
            return jnp.trace(jax.jacfwd(flux)(x)) / root(x) + 0.0 * ginv[0, 0]

        return b

    box_gamma, box_omega = box(gamma_fn), box(omega_fn)

    def residuals(x, p):
        g = metric_fn(x, p)
        ginv = jnp.linalg.inv(g)
        dg, dw = jax.grad(gamma_fn)(x, p), jax.grad(omega_fn)(x, p)
        gam = gamma_fn(x, p)
        r_gamma = box_gamma(x, p) + 0.5 * jnp.exp(-4 * gam) * dw @ ginv @ dw
        r_omega = box_omega(x, p) - 4 * dg @ ginv @ dw
        h = 4 * jnp.outer(dg, dg) + jnp.exp(-4 * gam) * jnp.outer(dw, dw)
        T = h - 0.5 * g * jnp.einsum("mn,mn->", ginv, h)
        e = E(x, p)
        ric = e.T @ ric_frame(x, p) @ e
        ein = ric - 0.5 * g * jnp.einsum("mn,mn->", ginv, ric)
        return dict(r_gamma=r_gamma, r_omega=r_omega, T=T, E=ein, mismatch=ein - 0.5 * T)

    return jax.jit(residuals)


# ---------------------------------------------------------------------------
# fixtures


def kasner_kk(p1: float, p2: float, p3: float) -> KKData:
    """Kasner as polarized KK data: ``gt = -dt^2 + t^{2p1} dx1^2 + t^{2p2} dx2^2``, ``gamma = p3 log t``."""
    chart = Chart(("t", "x1", "x2"), (-1, 1, 1), ((0.05, 50.0), (-10.0, 10.0), (-10.0, 10.0)))
    return KKData(chart, _kasner_orbit_metric, _kasner_gamma, _zero_form, jnp.asarray([p1, p2, p3]), True)


def _kasner_orbit_metric(x, p):
    t = x[0]
    return jnp.diag(jnp.stack([-1.0 + 0.0 * t, t ** (2 * p[0]), t ** (2 * p[1])]))


def _kasner_gamma(x, p):
    return p[2] * jnp.log(x[0])


def kasner_conformal_metric(x, p):
    """``g = e^{2 gamma} gt`` for the Kasner reduction."""
    return jnp.exp(2 * _kasner_gamma(x, p)) * _kasner_orbit_metric(x, p)


def kasner_gamma(x, p):
    return _kasner_gamma(x, p)


def zero_scalar(x, p):
    return 0.0 * x[0]
