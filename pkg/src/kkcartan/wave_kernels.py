"""Representation formulas for the flat wave equation ``u_tt - Laplace u = N``.

Three space dimensions use spherical means

    M_f(x, r) = (1 / 4 pi) int_{S^2} f(x + r w) dw,
    u = d_t (t M_{u0}(x, t)) + t M_{u1}(x, t),

with ``d_r M`` taken by a fourth-order central difference in the radius.
Two dimensions use Hadamard descent, written with the weighted disk mean

    D_f(x, r) = (1 / 2 pi) int_{|z| < 1} f(x + r z) (1 - |z|^2)^{-1/2} dz,
    u = d_t (t D_{u0}(x, t)) + t D_{u1}(x, t),

so ``t D_f`` is the two-dimensional source operator.  The radial part of the
disk rule is Gauss-Jacobi with the exact ``(1 - s)^{-1/2}`` weight after the
substitution ``s = |z|^2``.  The angular trapezoid has an even node count,
which makes the angular average even in ``|z|`` and the substitution smooth.

Sources enter through Duhamel's principle ``u_N(x, t) = int_0^t tau A_F(x, tau) dtau``
with ``A`` the sphere or disk mean of ``F(., t - tau)``.  Autonomous
nonlinearities ``N(u)`` are handled by Picard iteration on a radial
space-time lattice, which requires radially symmetric data.

Callables on space take an array of points with coordinates on the last axis
and return values of the leading shape; constants are broadcast.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline, CubicSpline
from scipy.special import roots_jacobi

from .errors import ConvergenceError, DomainError, GeometryError, QuadratureError
from .expressions import Expression

COORDS = ("x", "y", "z")
FD_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
FD_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


# ---------------------------------------------------------------------------
# data and rules


@dataclass(frozen=True)
class QuadratureSpec:
    """Orders of the sphere, disk and time rules.

    ``sphere``: (Gauss nodes in cos theta, trapezoid nodes in phi).
    ``disk``: (Gauss-Jacobi radial nodes, trapezoid angular nodes; even).
    ``time``: Gauss-Legendre nodes of the Duhamel integral.
    Every evaluation is repeated with all orders doubled; a difference above
    ``tol * max(1, |value|)`` raises :class:`QuadratureError`.
    """

    sphere: tuple = (24, 48)
    disk: tuple = (24, 48)
    time: int = 12
    tol: float = 1e-9
    fd_step: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "sphere", tuple(int(n) for n in self.sphere))
        object.__setattr__(self, "disk", tuple(int(n) for n in self.disk))
        orders = self.sphere + self.disk + (int(self.time),)
        if len(self.sphere) != 2 or len(self.disk) != 2 or min(orders) < 4:
            raise ValueError(f"quadrature orders must be pairs/ints >= 4, got {self}")
        if self.disk[1] % 2:
            raise ValueError("the angular disk rule needs an even node count")
        if not self.tol > 0 or not self.fd_step > 0:
            raise ValueError("tolerance and FD step must be positive")

    def doubled(self) -> "QuadratureSpec":
        return replace(self, sphere=tuple(2 * n for n in self.sphere), disk=tuple(2 * n for n in self.disk),
                       time=2 * self.time)

    @classmethod
    def parse(cls, text: str) -> "QuadratureSpec":
        """``"sphere=16x32,disk=16x32,time=12,tol=1e-9"``; omitted keys keep defaults."""
        kw = {}
        for item in filter(None, (s.strip() for s in text.split(","))):
            key, _, value = item.partition("=")
            key = key.strip()
            if key in ("sphere", "disk"):
                kw[key] = tuple(int(v) for v in value.lower().split("x"))
            elif key == "time":
                kw[key] = int(value)
            elif key in ("tol", "fd_step"):
                kw[key] = float(value)
            else:
                raise ValueError(f"unknown quadrature key {key!r} in {text!r}")
        return cls(**kw)


def _zero(y):
    return 0.0


@dataclass(frozen=True)
class CauchyData:
    """Initial data ``(u0, u1)`` on R^dim with an optional source.

    ``source(y, t)`` is a fixed forcing; ``nonlinearity(u)`` an autonomous one.
    ``box`` bounds where the data may be sampled (``None``: everywhere).
    ``center`` marks radial symmetry, which nonlinear problems require.
    """

    dim: int
    u0: Callable = _zero
    u1: Callable = _zero
    source: Callable | None = None
    nonlinearity: Callable | None = None
    box: tuple | None = None
    center: np.ndarray | None = None
    label: str = "data"

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise GeometryError(f"wave kernels are implemented in 2 and 3 space dimensions, not {self.dim}")
        if self.center is not None:
            c = np.asarray(self.center, dtype=float)
            if c.shape != (self.dim,):
                raise GeometryError(f"center needs {self.dim} coordinates")
            object.__setattr__(self, "center", c)

    @classmethod
    def from_expressions(cls, dim: int, u0: str = "0", u1: str = "0", source: str | None = None,
                         parameters=None, **kw) -> "CauchyData":
        """Data from expression strings in ``x, y, z`` (and ``t`` for the source)."""
        names = COORDS[:dim]
        e0, e1 = Expression(u0, names, parameters), Expression(u1, names, parameters)

        def field(ex):
            return lambda Y: ex.on_grid(**{n: Y[..., i] for i, n in enumerate(names)})

        src = None
        if source is not None:
            es = Expression(source, names + ("t",), parameters)

            def src(Y, t):
                env = {n: Y[..., i] for i, n in enumerate(names)}
                env["t"] = np.broadcast_to(np.asarray(t, dtype=float), Y.shape[:-1])
                return es.on_grid(**env)

        return cls(dim, field(e0), field(e1), src, label=kw.pop("label", f"u0={u0}; u1={u1}"), **kw)

    def lifted(self) -> "CauchyData":
        """The same 2D data viewed as 3D data independent of the last coordinate."""
        if self.dim != 2:
            raise GeometryError("only 2D data can be lifted")

        def lift(f):
            return lambda Y: f(Y[..., :2])

        src = None if self.source is None else (lambda Y, t: self.source(Y[..., :2], t))
        box = None if self.box is None else tuple(self.box) + ((-np.inf, np.inf),)
        center = None if self.center is None else np.append(self.center, 0.0)
        return CauchyData(3, lift(self.u0), lift(self.u1), src, self.nonlinearity, box, center,
                          self.label + " (lifted)")


def _evaluate(f: Callable, Y: np.ndarray, *extra) -> np.ndarray:
    v = np.asarray(f(Y, *extra), dtype=float)
    v = np.broadcast_to(v, Y.shape[:-1])
    if not np.all(np.isfinite(v)):
        raise GeometryError("data returned non-finite values on the quadrature footprint")
    return v


@functools.lru_cache(maxsize=None)
def sphere_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors and weights (summing to 1) of the Gauss x trapezoid sphere rule.

    The polar axis is the last coordinate, so a field symmetric about that
    axis is integrated exactly in ``phi`` by any node count.
    """
    mu, w = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - mu**2)
    pts = np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(mu, np.ones(n_phi))], axis=-1)
    weights = np.outer(0.5 * w, np.full(n_phi, 1.0 / n_phi))
    return pts.reshape(-1, 3), weights.ravel()


@functools.lru_cache(maxsize=None)
def disk_rule(n_radial: int, n_angle: int) -> tuple[np.ndarray, np.ndarray]:
    """Points of the unit disk and weights for ``D_f(x, 1)``; weights sum to 1."""
    z, w = roots_jacobi(n_radial, -0.5, 0.0)
    s = 0.5 * (z + 1.0)
    rho = np.sqrt(s)
    # int_0^1 (1-s)^{-1/2} H ds = 2^{-1/2} sum w H, and D = (1/2) of that integral
    a = w / (2.0 * np.sqrt(2.0))
    phi = 2.0 * np.pi * np.arange(n_angle) / n_angle
    pts = np.stack([np.outer(rho, np.cos(phi)), np.outer(rho, np.sin(phi))], axis=-1)
    weights = np.outer(a, np.full(n_angle, 1.0 / n_angle))
    return pts.reshape(-1, 2), weights.ravel()


def _rule(dim: int, quad: QuadratureSpec):
    return sphere_rule(*quad.sphere) if dim == 3 else disk_rule(*quad.disk)


def _kernel_mean(f: Callable, dim: int, X: np.ndarray, R: np.ndarray, quad: QuadratureSpec, *extra) -> np.ndarray:
    """Sphere mean (3D) or weighted disk mean (2D) of ``f`` for every centre/radius pair."""
    pts, w = _rule(dim, quad)
    Y = X[..., None, :] + np.asarray(R)[..., None, None] * pts
    return _evaluate(f, Y, *extra) @ w


def _check(value, coarse, quad: QuadratureSpec, what: str):
    estimate = float(np.max(np.abs(value - coarse))) if np.size(value) else 0.0
    scale = max(1.0, float(np.max(np.abs(value))) if np.size(value) else 0.0)
    if estimate > quad.tol * scale:
        raise QuadratureError(f"{what} did not settle under node doubling", estimate)
    return estimate


def _points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise GeometryError(f"expected points with {dim} coordinates, got shape {x.shape}")
    return x


def _require_footprint(data: CauchyData, X: np.ndarray, reach: float):
    if data.box is None:
        return
    box = np.asarray(data.box, dtype=float)
    lo, hi = X.reshape(-1, data.dim).min(0) - reach, X.reshape(-1, data.dim).max(0) + reach
    if np.any(lo < box[:, 0]) or np.any(hi > box[:, 1]):
        raise DomainError(f"the backward cone footprint (reach {reach:g}) leaves the data box {data.box}")


def _finish(value, estimate, return_estimate):
    value = float(value) if np.ndim(value) == 0 else value
    return (value, estimate) if return_estimate else value


def spherical_mean(f: Callable, x, r, quad: QuadratureSpec | None = None, return_estimate: bool = False):
    """``M_f(x, r)``; ``r = 0`` returns ``f(x)``."""
    quad = quad or QuadratureSpec()
    X = _points(x, 3)
    R = np.asarray(r, dtype=float)
    if np.any(R < 0):
        raise ValueError("the sphere radius must be non-negative")
    fine = _kernel_mean(f, 3, X, R, quad.doubled())
    est = _check(fine, _kernel_mean(f, 3, X, R, quad), quad, "spherical mean")
    return _finish(fine, est, return_estimate)


def disk_mean(f: Callable, x, r, quad: QuadratureSpec | None = None, return_estimate: bool = False):
    """``D_f(x, r)`` with the ``(1 - |z|^2)^{-1/2}`` weight; ``D_1 = 1``."""
    quad = quad or QuadratureSpec()
    X = _points(x, 2)
    R = np.asarray(r, dtype=float)
    if np.any(R < 0):
        raise ValueError("the disk radius must be non-negative")
    fine = _kernel_mean(f, 2, X, R, quad.doubled())
    est = _check(fine, _kernel_mean(f, 2, X, R, quad), quad, "disk mean")
    return _finish(fine, est, return_estimate)


# ---------------------------------------------------------------------------
# homogeneous problem


def _homogeneous(data: CauchyData, X: np.ndarray, t: float, quad: QuadratureSpec) -> np.ndarray:
    # d_t (t A_{u0}) = A_{u0} + t d_r A_{u0}; A is even in r, so negative radii are fine
    h = quad.fd_step * max(1.0, abs(t))
    radii = t + FD_OFFSETS * h
    shape = X.shape[:-1]
    R = np.broadcast_to(radii, shape + (5,))
    A0 = _kernel_mean(data.u0, data.dim, np.broadcast_to(X[..., None, :], shape + (5, data.dim)), R, quad)
    A1 = _kernel_mean(data.u1, data.dim, X, np.full(shape, t), quad)
    return A0[..., 2] + t * (A0 @ FD_WEIGHTS) / h + t * A1


def linear_solution(data: CauchyData, x, t: float, quad: QuadratureSpec | None = None,
                    return_estimate: bool = False):
    """Solution of the homogeneous problem at ``(x, t)``; negative ``t`` evolves backward."""
    quad = quad or QuadratureSpec()
    X = _points(x, data.dim)
    t = float(t)
    _require_footprint(data, X, abs(t) + 2 * quad.fd_step * max(1.0, abs(t)))
    fine = _homogeneous(data, X, t, quad.doubled())
    est = _check(fine, _homogeneous(data, X, t, quad), quad, "representation formula")
    return _finish(fine, est, return_estimate)


def kirchhoff_3d(data: CauchyData, x, t: float, quad: QuadratureSpec | None = None, return_estimate: bool = False):
    """``d_t(t M_{u0}(x, t)) + t M_{u1}(x, t)`` for 3D data (sources ignored)."""
    if data.dim != 3:
        raise GeometryError("kirchhoff_3d needs three-dimensional data")
    return linear_solution(data, x, t, quad, return_estimate)


def descent_2d(data: CauchyData, x, t: float, quad: QuadratureSpec | None = None, return_estimate: bool = False):
    """``d_t(t D_{u0}(x, t)) + t D_{u1}(x, t)`` for 2D data (sources ignored)."""
    if data.dim != 2:
        raise GeometryError("descent_2d needs two-dimensional data")
    return linear_solution(data, x, t, quad, return_estimate)


def source_operator(f: Callable, dim: int, x, t: float, quad: QuadratureSpec | None = None) -> float:
    """Solution at time ``t`` with zero position and velocity ``f``: ``t M_f`` or ``t D_f``."""
    quad = quad or QuadratureSpec()
    X = _points(x, dim)
    fine = t * _kernel_mean(f, dim, X, np.full(X.shape[:-1], float(t)), quad.doubled())
    _check(fine, t * _kernel_mean(f, dim, X, np.full(X.shape[:-1], float(t)), quad), quad, "source operator")
    return _finish(fine, 0.0, False)


# ---------------------------------------------------------------------------
# sources


@functools.lru_cache(maxsize=None)
def _time_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (s + 1.0), 0.5 * w


def _forced(source: Callable, dim: int, X: np.ndarray, t: float, quad: QuadratureSpec) -> np.ndarray:
    # int_0^t tau A_{F(., t - tau)}(x, tau) dtau
    nodes, weights = _time_rule(quad.time)
    acc = np.zeros(X.shape[:-1])
    for s, w in zip(nodes, weights):
        tau = s * t
        acc = acc + w * t * tau * _kernel_mean(source, dim, X, np.full(X.shape[:-1], tau), quad, t - tau)
    return acc


def forced_solution(data: CauchyData, x, t: float, quad: QuadratureSpec | None = None,
                    return_estimate: bool = False):
    """Zero-data response to ``data.source`` by the Duhamel time integral."""
    if data.source is None:
        raise GeometryError("data carries no fixed source")
    quad = quad or QuadratureSpec()
    X = _points(x, data.dim)
    t = float(t)
    if t < 0:
        raise ValueError("Duhamel integrals run forward in time")
    _require_footprint(data, X, t)
    fine = _forced(data.source, data.dim, X, t, quad.doubled())
    est = _check(fine, _forced(data.source, data.dim, X, t, quad), quad, "Duhamel integral")
    return _finish(fine, est, return_estimate)


@dataclass
class DuhamelResult:
    value: float
    error_estimate: float
    iterate_history: list = field(default_factory=list)
    linear: float = 0.0

    def as_dict(self) -> dict:
        return {"value": self.value, "error_estimate": self.error_estimate,
                "iterate_history": list(self.iterate_history), "linear": self.linear}


def _require_radial(data: CauchyData, reach: float):
    rng = np.random.default_rng(0)
    dirs = rng.normal(size=(6, data.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.linspace(0.0, reach, 7)
    for f in (data.u0, data.u1):
        vals = _evaluate(f, data.center + radii[:, None, None] * dirs[None, :, :])
        spread = np.max(np.ptp(vals, axis=1))
        if spread > 1e-10 * max(1.0, np.max(np.abs(vals))):
            raise GeometryError(f"data is not radially symmetric about the center (spread {spread:.2e})")


class _RadialLattice:
    """Values ``U[i, m]`` at ``center + r_i e_last`` and time ``t_m``."""

    def __init__(self, data: CauchyData, radius: float, t: float, shape: tuple):
        nr, nt = shape
        if nr < 8 or nt < 4:
            raise ValueError("the lattice needs at least 8 radial and 4 time levels")
        self.data = data
        self.r = np.linspace(0.0, radius, nr)
        self.t = np.linspace(0.0, t, nt)
        axis = np.zeros(data.dim)
        axis[-1] = 1.0
        self.X = data.center + self.r[:, None] * axis

    def interpolant(self, U: np.ndarray) -> Callable:
        # even extension in r keeps the spline accurate at the centre
        r = np.concatenate([-self.r[:0:-1], self.r])
        vals = np.concatenate([U[:0:-1], U], axis=0)
        spline = RectBivariateSpline(r, self.t, vals, kx=3, ky=3)
        rmax, center = self.r[-1], self.data.center

        def u(Y, s):
            rho = np.minimum(np.linalg.norm(Y - center, axis=-1), rmax)
            return spline.ev(rho, np.broadcast_to(s, rho.shape))

        return u


def _lattice_quad(dim: int, quad: QuadratureSpec) -> QuadratureSpec:
    # lattice points sit on the polar axis, where the integrand is phi-independent
    return replace(quad, sphere=(quad.sphere[0], 4)) if dim == 3 else quad


def _nonlinear_forcing(data: CauchyData, u: Callable) -> Callable:
    N = data.nonlinearity

    def forcing(Y, s):
        value = N(u(Y, s))
        if data.source is not None:
            value = value + data.source(Y, s)
        return value

    return forcing


def duhamel_solve(data: CauchyData, x, t: float, quad: QuadratureSpec | None = None, iters: int = 30,
                  lattice: tuple = (48, 24), tol: float = 1e-12) -> DuhamelResult:
    """``u = u_L + int_0^t S_{N(u)}(x, t - t') dt'``.

    Without a nonlinearity this is the linear solution plus the fixed-source
    integral (estimate from node doubling).  With one, Picard iterates
    ``u^{k+1} = u_L + Duhamel(N(u^k))`` live on a radial (r, t) lattice covering
    the backward cone of ``(x, t)``; the history records
    ``max |u^{k+1} - u^k|`` and growth of that distance raises
    :class:`ConvergenceError`.
    """
    quad = quad or QuadratureSpec()
    X = _points(x, data.dim)
    t = float(t)
    if t < 0:
        raise ValueError("Duhamel integrals run forward in time")
    lin, est = linear_solution(data, X, t, quad, return_estimate=True)
    if data.nonlinearity is None:
        value = lin
        if data.source is not None:
            forced, est_f = forced_solution(data, X, t, quad, return_estimate=True)
            value, est = value + forced, est + est_f
        return DuhamelResult(float(value), float(est), [], float(lin))

    if data.center is None:
        raise GeometryError("nonlinear problems are solved on a radial lattice; give the data a center")
    reach = float(np.linalg.norm(X - data.center)) + t
    _require_radial(data, reach)
    lat = _RadialLattice(data, max(reach, 1e-12), t, lattice)
    lq = _lattice_quad(data.dim, quad)
    UL = np.stack([_homogeneous(data, lat.X, tm, lq) for tm in lat.t], axis=1)
    U = UL.copy()
    history = []
    for k in range(iters):
        forcing = _nonlinear_forcing(data, lat.interpolant(U))
        D = np.zeros_like(U)
        for m, tm in enumerate(lat.t[1:], start=1):
            D[:, m] = _forced(forcing, data.dim, lat.X, tm, lq)
        new = UL + D
        history.append(float(np.max(np.abs(new - U))))
        U = new
        if history[-1] <= tol:
            break
        if k >= 1 and history[-1] > history[-2]:
            raise ConvergenceError("Picard iterates are not contracting; shorten t or shrink the data", history)
    forcing = _nonlinear_forcing(data, lat.interpolant(U))
    value = lin + _forced(forcing, data.dim, X, t, quad)
    return DuhamelResult(float(value), float(est + (history[-1] if history else 0.0)), history, float(lin))


# ---------------------------------------------------------------------------
# references and probes


def radial_fdtd(u0_profile: Callable, u1_profile: Callable, t: float, r_eval, nonlinearity: Callable | None = None,
                r_max: float | None = None, dr: float = 1e-3, courant: float = 0.5) -> np.ndarray:
    """Leapfrog reference for radial 3D solutions, via ``v = r u`` and ``v_tt = v_rr + r N(v / r)``.

    Second order in ``dr``; ``r_max`` must keep the outer wall out of the
    domain of dependence of ``r_eval``.
    """
    r_eval = np.atleast_1d(np.asarray(r_eval, dtype=float))
    r_max = float(r_max if r_max is not None else r_eval.max() + 2.0 * t + 4.0)
    nr = int(np.ceil(r_max / dr))
    r = np.linspace(0.0, nr * dr, nr + 1)
    dr = r[1]
    steps = max(1, int(np.ceil(t / (courant * dr))))
    dt = t / steps
    N = nonlinearity or (lambda u: 0.0 * u)

    def accel(v):
        a = np.zeros_like(v)
        a[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dr**2 + r[1:-1] * N(v[1:-1] / r[1:-1])
        return a

    v_prev = r * u0_profile(r)
    v = v_prev + dt * r * u1_profile(r) + 0.5 * dt**2 * accel(v_prev)
    v[0] = v[-1] = 0.0
    for _ in range(steps - 1):
        v_prev, v = v, 2.0 * v - v_prev + dt**2 * accel(v)
        v[0] = v[-1] = 0.0
    spline = CubicSpline(r, v)
    # u = v / r, and v'(0) at the centre
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(r_eval > 0, spline(r_eval) / np.where(r_eval > 0, r_eval, 1.0), spline(0.0, 1))
    return u


def smooth_bump(radius: float = 1.0, amplitude: float = 1.0, center=None) -> Callable:
    """``amplitude * exp(1 - 1 / (1 - |y - c|^2 / radius^2))`` inside the ball, exactly 0 outside."""

    def bump(Y):
        Y = np.asarray(Y, dtype=float)
        c = 0.0 if center is None else np.asarray(center, dtype=float)[: Y.shape[-1]]
        q = np.sum((Y - c) ** 2, axis=-1) / radius**2
        out = np.zeros(q.shape)
        inside = q < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    return bump


def huygens_probe(u0: Callable, u1: Callable, support: float, x, t: float,
                  quad: QuadratureSpec | None = None) -> dict:
    """Evaluate the same data (supported in ``|y| <= support``) in 3D and in 2D.

    ``x`` is a planar point; the 3D evaluation uses ``(x, 0)``.  Inside the
    cone interior ``|x| + support < t`` the 3D value vanishes by the strong
    Huygens principle while the 2D value keeps a tail.
    """
    quad = quad or QuadratureSpec(disk=(256, 16), tol=1e-5)
    x = _points(x, 2)
    if not np.linalg.norm(x) + support < t:
        raise DomainError(f"probe point must satisfy |x| + support < t (got |x|={np.linalg.norm(x):g}, "
                          f"support={support:g}, t={t:g})")
    u3, e3 = linear_solution(CauchyData(3, u0, u1), np.append(x, 0.0), t, quad, return_estimate=True)
    u2, e2 = linear_solution(CauchyData(2, u0, u1), x, t, quad, return_estimate=True)
    return {"u3d": u3, "u2d": u2, "estimate_3d": e3, "estimate_2d": e2}


def plane_wave_data(k) -> CauchyData:
    """``u0 = sin(k.y)``, ``u1 = -|k| cos(k.y)``; exact solution ``sin(k.x - |k| t)``."""
    k = np.asarray(k, dtype=float)
    kn = float(np.linalg.norm(k))
    return CauchyData(k.shape[0], lambda Y: np.sin(Y @ k), lambda Y: -kn * np.cos(Y @ k), label=f"plane wave k={k.tolist()}")


__all__ = [
    "QuadratureSpec", "CauchyData", "sphere_rule", "disk_rule", "spherical_mean", "disk_mean",
    "linear_solution", "kirchhoff_3d", "descent_2d", "source_operator", "forced_solution",
    "DuhamelResult", "duhamel_solve", "radial_fdtd", "smooth_bump", "huygens_probe", "plane_wave_data",
]
