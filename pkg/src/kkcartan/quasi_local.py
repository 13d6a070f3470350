"""Quasi-local Killing diagnostics around a base point.

Three pieces live here:

* the radial-gauge (Cronstrom) connection recovered from curvature sampled
  along rays out of the base point, by Gauss-Legendre quadrature in the ray
  parameter with a node-doubling error estimate;
* Killing and conformal Killing forms of the gradient of the optical function
  ``f = g_{mu nu} x^mu x^nu``, together with its wave operator.  Each comes in
  a *covariant* route (Hessian with Christoffel symbols) and a *closed* route
  (the shortcut formulas valid when ``g_{mu nu} x^nu = eta_{mu nu} x^nu``);
* commutators of frame vector fields from connection one-forms, with an
  independent finite-difference Lie bracket to check against.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .cartan_curvature import CurvatureField, SpinConnection, christoffel_symbols, solve_spin_connection
from .derivatives import jacobian
from .errors import GeometryError, QuadratureError
from .frame_algebra import DET_TOL, CoFrame, MetricField, ldl_coframe_matrix

DEFAULT_NODES = 32
DEFAULT_QUAD_TOL = 1e-10


# ---------------------------------------------------------------------------
# radial-gauge connection


@functools.lru_cache(maxsize=None)
def _gauss_legendre_unit(n: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes and weights mapped from [-1, 1] to [0, 1]
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w


@dataclass(frozen=True)
class RadialField:
    """Curvature two-form ``F[..., mu, nu](y)`` sampled on rays from ``base``.

    ``sampler`` takes a coordinate point and returns an array whose last two
    axes are the antisymmetric form legs; leading axes (frame pair, gauge
    indices) are carried through untouched.
    """

    sampler: Callable
    base: np.ndarray = field(default_factory=lambda: np.zeros(4))
    nodes: int = DEFAULT_NODES
    tol: float = DEFAULT_QUAD_TOL

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        if self.nodes < 1:
            raise ValueError("at least one quadrature node is needed")

    @classmethod
    def from_curvature(cls, curv: CurvatureField, base=None, **kw) -> "RadialField":
        """Mixed curvature ``F^a_{b mu nu}`` of a coframe, rays from ``base`` (default: origin)."""
        base = np.zeros(curv.chart.dim) if base is None else base
        return cls(curv.mixed, base, **kw)

    def sample(self, y) -> np.ndarray:
        value = np.asarray(self.sampler(np.asarray(y, dtype=float)), dtype=float)
        if not np.all(np.isfinite(value)):
            raise GeometryError(f"curvature sampler returned non-finite values at {np.asarray(y).tolist()}")
        return value


def _ray_integral(rf: RadialField, dx: np.ndarray, n: int) -> np.ndarray:
    lam, w = _gauss_legendre_unit(n)
    acc = 0.0
    for li, wi in zip(lam, w):
        f = rf.sample(rf.base + li * dx)
        acc = acc + wi * li * (f @ dx)
    return -acc


def cronstrom_connection(rf: RadialField, x, return_estimate: bool = False):
    """``Theta_mu(x) = -int_0^1 F_{mu nu}(base + s dx) s dx^nu ds`` with ``dx = x - base``.

    The result has the sampler's leading axes followed by one form index.
    Quadrature runs at ``rf.nodes`` and at twice that; the doubled value is
    returned and their difference is the error estimate.
    """
    dx = np.asarray(x, dtype=float) - rf.base
    if dx.shape != rf.base.shape:
        raise GeometryError(f"point has shape {dx.shape}, base point has {rf.base.shape}")
    coarse = _ray_integral(rf, dx, rf.nodes)
    fine = _ray_integral(rf, dx, 2 * rf.nodes)
    estimate = float(np.max(np.abs(fine - coarse))) if fine.size else 0.0
    scale = max(1.0, float(np.max(np.abs(fine))) if fine.size else 0.0)
    if estimate > rf.tol * scale:
        raise QuadratureError(f"ray integral at {np.asarray(x).tolist()} did not settle with "
                              f"{rf.nodes}/{2 * rf.nodes} nodes", estimate)
    return (fine, estimate) if return_estimate else fine


def matrix_curvature(connection: Callable, x, step: float = 1e-4) -> np.ndarray:
    """``d Theta + Theta ^ Theta`` of a matrix-valued one-form ``connection(x)[a, b, mu]``.

    Derivatives are fourth-order central differences, so this is usable on the
    output of :func:`cronstrom_connection` itself.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    th = np.asarray(connection(x), dtype=float)
    dth = np.empty(th.shape + (n,))
    for nu in range(n):
        e = np.zeros(n)
        e[nu] = step
        dth[..., nu] = (connection(x - 2 * e) - 8 * connection(x - e)
                        + 8 * connection(x + e) - connection(x + 2 * e)) / (12 * step)
    # dth[a, b, mu, nu] = d_nu Theta_mu
    d = np.swapaxes(dth, -1, -2) - dth
    wedge = np.einsum("acm,cbn->abmn", th, th)
    return d + wedge - np.swapaxes(wedge, -1, -2)


# ---------------------------------------------------------------------------
# optical function


@dataclass(frozen=True)
class OpticalFrame:
    """Metric in normal-type coordinates centred at the origin, with ``f = g(x)(x, x)``."""

    metric: MetricField
    mode: str = "ad"
    fd_step: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("ad", "fd"):
            raise ValueError(f"unknown derivative mode {self.mode!r}")
        if self.mode == "ad" and not self.metric.traceable:
            object.__setattr__(self, "mode", "fd")

    @property
    def chart(self):
        return self.metric.chart

    def f(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.metric(x) @ x)

    @functools.cached_property
    def _kernels(self):
        return _optical_kernels(self.metric.fn, self.mode, self.fd_step if self.mode == "fd" else 0.0,
                                self.metric.traceable)


def _fn_f(metric_fn):
    def f(x, params):
        return x @ metric_fn(x, params) @ x
    return f


@functools.lru_cache(maxsize=None)
def _optical_kernels(metric_fn, mode, step, traceable):
    f = _fn_f(metric_fn)
    dg = jacobian(metric_fn, mode, step, batched=traceable)
    df = jacobian(f, mode, step, batched=traceable)
    ddf = jacobian(df, mode, step, batched=traceable)

    def pack(x, params):
        return metric_fn(x, params), dg(x, params), f(x, params), df(x, params), ddf(x, params)

    return jax.jit(pack) if traceable else pack


def normal_origin(metric: MetricField) -> MetricField:
    """Pull ``metric`` back by the constant linear map that makes ``g(0) = eta``.

    The new coordinates are ``x = L x'`` with ``L^T g(0) L = eta``; the origin
    must lie in the chart.
    """
    g0 = metric(np.zeros(metric.chart.dim))
    e, d = ldl_coframe_matrix(jnp.asarray(g0))
    if np.any(np.sign(np.asarray(d)) != np.asarray(metric.chart.signature)):
        raise GeometryError("metric at the origin does not match the chart signature")
    lin = jnp.asarray(np.linalg.inv(np.asarray(e)))
    fn = metric.fn

    def pulled(x, params):
        return lin.T @ fn(lin @ x, params) @ lin

    return MetricField(metric.chart, pulled, metric.params, traceable=metric.traceable, fd_step=metric.fd_step)


def _optical_data(of: OpticalFrame, x):
    x = of.chart.require(x)
    g, dg, f, df, ddf = (np.asarray(a, dtype=float) for a in of._kernels(jnp.asarray(x), of.metric.params))
    det = np.linalg.det(g)
    if not np.isfinite(det) or abs(det) <= DET_TOL:
        raise GeometryError(f"metric is degenerate at {x.tolist()}")
    return x, g, dg, float(f), df, ddf


def optical_gradient_defect(of: OpticalFrame, x) -> dict:
    """How far ``x`` is from the normal-coordinate identities of ``f``.

    ``gradient``: ``nabla^beta f - 2 x^beta``.  ``eikonal``:
    ``g^{ab} d_a f d_b f - 4 f``.  Both vanish when ``g_{mu nu} x^nu = eta_{mu nu} x^nu``.
    """
    x, g, _, f, df, _ = _optical_data(of, x)
    ginv = np.linalg.inv(g)
    up = ginv @ df
    return {"gradient": up - 2.0 * x, "eikonal": float(df @ up - 4.0 * f)}


def optical_killing_forms(of: OpticalFrame, x) -> dict:
    """Killing form, conformal Killing form and wave operator of ``f`` at ``x``.

    ``K``, ``CK``, ``box_f`` come from the covariant Hessian
    ``nabla_a d_b f = d_a d_b f - Gamma^c_{ab} d_c f``:
    ``K = 2 nabla d f``, ``box_f = g^{ab} nabla_a d_b f``, ``CK = K - g box_f / 2``.

    ``K_closed``, ``CK_closed``, ``box_closed`` are the shortcut formulas
    ``4 g + 2 x.dg``, ``2 x.dg - g tr(g^{-1} x.dg) / 2`` and
    ``8 + 2 x^nu d_nu log sqrt|g|``, which agree with the covariant values
    exactly when ``nabla f = 2 x``.
    """
    x, g, dg, f, df, ddf = _optical_data(of, x)
    ginv = np.linalg.inv(g)
    gamma = np.asarray(christoffel_symbols(jnp.asarray(g), jnp.asarray(dg)))
    hess = 0.5 * (ddf + ddf.T) - np.einsum("cab,c->ab", gamma, df)
    K = 2.0 * hess
    box = float(np.einsum("ab,ab->", ginv, hess))
    CK = K - 0.5 * g * box

    xdg = np.einsum("mnr,r->mn", dg, x)
    trace = float(np.einsum("ab,ab->", ginv, xdg))
    K_closed = 4.0 * g + 2.0 * xdg
    CK_closed = 2.0 * xdg - 0.5 * g * trace
    # 2 x^nu (-g)^{-1/2} d_nu sqrt(-g) = x^nu g^{ab} d_nu g_ab
    box_closed = 8.0 + trace
    return {"K": K, "CK": CK, "box_f": box,
            "K_closed": K_closed, "CK_closed": CK_closed, "box_closed": box_closed}


def scaling_exponent(radii, values) -> float:
    """Least-squares slope of ``log values`` against ``log radii``."""
    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(radii <= 0) or np.any(values <= 0):
        raise ValueError("a log-log fit needs positive radii and values")
    slope, _ = np.polyfit(np.log(radii), np.log(values), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# frame commutators


def frame_commutator(coframe: CoFrame, theta: SpinConnection | None, a: int, b: int, x) -> np.ndarray:
    """``[e_a, e_b]^nu = e_c^nu (e_a^mu Theta^c_{b mu} - e_b^mu Theta^c_{a mu})``."""
    theta = solve_spin_connection(coframe) if theta is None else theta
    v = np.linalg.inv(coframe.matrix(x))
    th = theta(x)
    coeff = th[:, b, :] @ v[:, a] - th[:, a, :] @ v[:, b]
    return v @ coeff


def commutator_coefficients(coframe: CoFrame, theta: SpinConnection | None, a: int, b: int, x) -> np.ndarray:
    """Frame components ``c^c`` of ``[e_a, e_b] = c^c e_c``."""
    return coframe.matrix(x) @ frame_commutator(coframe, theta, a, b, x)


def lie_bracket_fd(coframe: CoFrame, a: int, b: int, x, step: float = 1e-4) -> np.ndarray:
    """``X^mu d_mu Y^nu - Y^mu d_mu X^nu`` for frame legs ``X = e_a``, ``Y = e_b``.

    Fourth-order central differences of the inverted coframe matrix; no
    connection is involved.
    """
    x = coframe.chart.require(x)
    step = coframe.chart.fit_step(x, step)
    n = x.shape[0]

    def legs(y):
        return np.linalg.inv(coframe.matrix(y))

    dv = np.empty((n, n, n))  # dv[nu, c, mu] = d_mu e_c^nu
    for mu in range(n):
        e = np.zeros(n)
        e[mu] = step
        dv[:, :, mu] = (legs(x - 2 * e) - 8 * legs(x - e) + 8 * legs(x + e) - legs(x + 2 * e)) / (12 * step)
    v = legs(x)
    return dv[:, b, :] @ v[:, a] - dv[:, a, :] @ v[:, b]


__all__ = [
    "DEFAULT_NODES", "DEFAULT_QUAD_TOL", "RadialField", "cronstrom_connection", "matrix_curvature",
    "OpticalFrame", "normal_origin", "optical_gradient_defect", "optical_killing_forms", "scaling_exponent",
    "frame_commutator", "commutator_coefficients", "lie_bracket_fd",
]
