"""Reduced canonical phase space of U(1)-symmetric vacuum gravity on a periodic 2D grid.

Fields are numpy arrays whose trailing two axes are the grid. Tensor indices come
first, e.g. ``q`` has shape ``(2, 2, nx, ny)`` and ``shift`` has shape ``(2, nx, ny)``.
Densities (``pi``, ``p_gamma``, ``p_omega``, ``E``) carry weight one: they are
tensors multiplied by ``mu = sqrt(det q)``.

Spatial derivatives use the fourth-order centred stencil with periodic wraparound,
so every operator commutes exactly with grid translations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import GeometryError

WM_FIELDS = ("q", "pi", "gamma", "p_gamma", "omega", "p_omega")
KK_FIELDS = ("A", "E")
EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on ``[0, nx hx) x [0, ny hy)``."""

    nx: int
    ny: int
    hx: float
    hy: float

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise GeometryError(f"grid needs at least 8 nodes per direction, got {self.nx}x{self.ny}")
        if not (self.hx > 0 and self.hy > 0):
            raise GeometryError("grid spacing must be positive")

    @classmethod
    def square(cls, n: int, length: float = 1.0) -> "Grid2D":
        return cls(n, n, length / n, length / n)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def lengths(self) -> tuple[float, float]:
        return (self.nx * self.hx, self.ny * self.hy)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def d(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Fourth-order periodic derivative along grid direction ``axis`` (0 = x, 1 = y)."""
        ax = f.ndim - 2 + axis
        h = self.hx if axis == 0 else self.hy
        return (np.roll(f, 2, ax) - 8.0 * np.roll(f, 1, ax) + 8.0 * np.roll(f, -1, ax) - np.roll(f, -2, ax)) / (12.0 * h)

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Derivative index prepended: ``grad(f)[c] = d_c f``."""
        return np.stack([self.d(f, 0), self.d(f, 1)])

    def div(self, v: np.ndarray) -> np.ndarray:
        """``d_a v^a`` contracting the first index of ``v``."""
        return self.d(v[0], 0) + self.d(v[1], 1)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CanonicalState:
    """Snapshot of the reduced phase space.

    Wave-map variables are always present (``omega``, ``p_omega`` default to zero).
    ``A``/``E`` switch on the Kaluza-Klein form of the constraints and Weyl fields.
    Scalars and constant 2x2 matrices are broadcast over the grid.
    """

    grid: Grid2D
    q: np.ndarray
    pi: np.ndarray
    gamma: np.ndarray
    p_gamma: np.ndarray
    omega: np.ndarray = 0.0
    p_omega: np.ndarray = 0.0
    A: np.ndarray | None = None
    E: np.ndarray | None = None

    def __post_init__(self):
        shape = self.grid.shape
        for name, rank in (("q", 2), ("pi", 2), ("gamma", 0), ("p_gamma", 0), ("omega", 0), ("p_omega", 0),
                           ("A", 1), ("E", 1)):
            value = getattr(self, name)
            if value is None:
                continue
            arr = _broadcast(value, rank, shape, name)
            object.__setattr__(self, name, arr)
        if (self.A is None) != (self.E is None):
            raise GeometryError("A and E must be given together")
        q = self.q
        with np.errstate(over="ignore", invalid="ignore"):
            det = q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0]
        if not np.all(np.isfinite(det)) or np.any(q[0, 0] <= 0) or np.any(det <= 0):
            raise GeometryError("spatial metric q is not positive definite at every node")
        if np.max(np.abs(q[0, 1] - q[1, 0])) > 1e-12 or np.max(np.abs(self.pi[0, 1] - self.pi[1, 0])) > 1e-12:
            raise GeometryError("q and pi must be symmetric")

    @property
    def kk(self) -> bool:
        return self.A is not None

    def replace(self, **changes) -> "CanonicalState":
        return replace(self, **changes)

    def advanced(self, rates: dict, dt: float) -> "CanonicalState":
        """Explicit step ``f + dt * rates[f]`` on the fields present in ``rates``."""
        new = {k: getattr(self, k) + dt * np.asarray(v) for k, v in rates.items()}
        out = replace(self, **new)
        for k in new:
            if not np.all(np.isfinite(getattr(out, k))):
                raise GeometryError(f"advance produced non-finite values in {k!r}")
        return out

    def translated(self, sx: int, sy: int) -> "CanonicalState":
        """Periodic shift by whole grid cells."""
        def roll(a):
            return None if a is None else np.roll(a, (sx, sy), axis=(-2, -1))
        return replace(self, **{f.name: roll(getattr(self, f.name)) for f in fields(self) if f.name != "grid"})


def _broadcast(value, rank, shape, name):
    arr = np.asarray(value, dtype=float)
    want = (2,) * rank + shape
    if arr.shape == want:
        return arr.copy()
    if arr.shape == (2,) * rank:
        return np.broadcast_to(arr.reshape(arr.shape + (1, 1)), want).copy()
    raise GeometryError(f"field {name!r} has shape {arr.shape}, expected {want} or {(2,) * rank}")


@dataclass(frozen=True, eq=False)
class GaugeData:
    """Lapse ``N > 0``, shift ``N^a``; ``tau`` and ``nu`` only for the conformal gauge."""

    grid: Grid2D
    N: np.ndarray = 1.0
    shift: np.ndarray = 0.0
    tau: np.ndarray | None = None
    nu: np.ndarray | None = None

    def __post_init__(self):
        shape = self.grid.shape
        object.__setattr__(self, "N", _broadcast(self.N, 0, shape, "N"))
        shift = np.asarray(self.shift, dtype=float)
        object.__setattr__(self, "shift", _broadcast(np.zeros(2) if shift.ndim == 0 and shift == 0 else shift,
                                                     1, shape, "shift"))
        for name in ("tau", "nu"):
            if getattr(self, name) is not None:
                object.__setattr__(self, name, _broadcast(getattr(self, name), 0, shape, name))
        if np.any(self.N <= 0) or not np.all(np.isfinite(self.N)):
            raise GeometryError("lapse must be positive everywhere")


# ---------------------------------------------------------------------------
# metric geometry on the grid
# ---------------------------------------------------------------------------


def _inverse(g: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))


def _det(g: np.ndarray) -> np.ndarray:
    return np.linalg.det(np.moveaxis(g, (0, 1), (-2, -1)))


def _metric_derivatives(g: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``dg[c, a, b] = d_c g_ab``; coordinates beyond the grid's two are Killing directions."""
    n = g.shape[0]
    dg = np.zeros((n,) + g.shape)
    dg[0], dg[1] = grid.d(g, 0), grid.d(g, 1)
    return dg


def christoffel(g: np.ndarray, ginv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``Gamma[c, a, b] = Gamma^c_ab``."""
    low = 0.5 * (np.einsum("adb...->dab...", dg) + np.einsum("bda...->dab...", dg) - dg)
    return np.einsum("cd...,dab...->cab...", ginv, low)


def ricci_tensor(g: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Ricci tensor ``R_ab`` of a metric independent of every coordinate past the second."""
    n = g.shape[0]
    ginv = _inverse(g)
    gam = christoffel(g, ginv, _metric_derivatives(g, grid))
    dgam = np.zeros((n,) + gam.shape)  # dgam[e, c, a, b] = d_e Gamma^c_ab
    dgam[0], dgam[1] = grid.d(gam, 0), grid.d(gam, 1)
    return (np.einsum("ccab...->ab...", dgam) - np.einsum("bcac...->ab...", dgam)
            + np.einsum("ccd...,dab...->ab...", gam, gam) - np.einsum("cbd...,dac...->ab...", gam, gam))


class _Geometry:
    """Quantities of ``q`` shared by the constraint and evolution formulas."""

    def __init__(self, state: CanonicalState):
        g = state.grid
        self.grid = g
        self.q = state.q
        self.qinv = _inverse(state.q)
        self.mu = np.sqrt(_det(state.q))
        self.dq = _metric_derivatives(state.q, g)
        self.gamma = christoffel(state.q, self.qinv, self.dq)
        self._ricci = None

    @property
    def ricci(self):
        if self._ricci is None:
            self._ricci = ricci_tensor(self.q, self.grid)
        return self._ricci

    @property
    def scalar(self):
        return np.einsum("ab...,ab...->...", self.qinv, self.ricci)

    def raise2(self, t):
        return np.einsum("ac...,bd...,cd...->ab...", self.qinv, self.qinv, t)

    def lower2(self, t):
        return np.einsum("ac...,bd...,cd...->ab...", self.q, self.q, t)

    def norm2(self, v):
        """``q^{ab} v_a v_b`` for covectors; the first axis of ``v`` is the index."""
        return np.einsum("ab...,a...,b...->...", self.qinv, v, v)

    def hessian(self, f):
        df = self.grid.grad(f)
        dd = np.stack([self.grid.grad(df[0]), self.grid.grad(df[1])])  # dd[b, a] = d_a d_b f
        dd = 0.5 * (dd + np.swapaxes(dd, 0, 1))
        return dd - np.einsum("cab...,c...->ab...", self.gamma, df)

    def laplacian(self, f):
        return np.einsum("ab...,ab...->...", self.qinv, self.hessian(f))


def field_strength(A: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``F_ab = d_a A_b - d_b A_a``."""
    dA = grid.grad(A)  # dA[a, b] = d_a A_b
    return dA - np.swapaxes(dA, 0, 1)


def dedensitize(density: np.ndarray, state: CanonicalState) -> np.ndarray:
    """Weight-one density to tensor: divide by ``sqrt(det q)``."""
    return density / np.sqrt(_det(state.q))


def densitize(tensor: np.ndarray, state: CanonicalState) -> np.ndarray:
    return tensor * np.sqrt(_det(state.q))


def mean_curvature(state: CanonicalState) -> np.ndarray:
    """``tau = tr(pi) / mu``; the sign makes a collapsing slice positive."""
    geo = _Geometry(state)
    return np.einsum("ab...,ab...->...", state.q, state.pi) / geo.mu


# ---------------------------------------------------------------------------
# constraints
# ---------------------------------------------------------------------------


def _kinetic(state, geo):
    pi_low = geo.lower2(state.pi)
    pipi = np.einsum("ab...,ab...->...", pi_low, state.pi)
    tr = np.einsum("ab...,ab...->...", state.q, state.pi)
    return pipi, tr


def hamiltonian_constraint(state: CanonicalState, form: str = "auto") -> np.ndarray:
    """Hamiltonian constraint density on the grid.

    ``form="wm"`` uses the twist variables ``(omega, p_omega)``; ``form="kk"`` uses
    ``(A, E)``. ``"auto"`` picks ``kk`` when ``A`` is present.
    """
    form = _resolve_form(state, form)
    g = state.grid
    geo = _Geometry(state)
    mu = geo.mu
    pipi, tr = _kinetic(state, geo)
    dgam = g.grad(state.gamma)
    kinetic = pipi - tr**2 + state.p_gamma**2 / 8.0
    potential = -geo.scalar + 2.0 * geo.norm2(dgam)
    e4 = np.exp(4.0 * state.gamma)
    if form == "wm":
        kinetic = kinetic + 0.5 * e4 * state.p_omega**2
        potential = potential + 0.5 / e4 * geo.norm2(g.grad(state.omega))
    else:
        F = field_strength(state.A, g)
        kinetic = kinetic + 0.5 / e4 * np.einsum("ab...,a...,b...->...", state.q, state.E, state.E)
        potential = potential + 0.25 * e4 * np.einsum("ab...,ab...->...", geo.raise2(F), F)
    return kinetic / mu + mu * potential


def momentum_constraint(state: CanonicalState, form: str = "auto") -> np.ndarray:
    """``H_a = -2 nabla_b pi^b_a + p_gamma d_a gamma + (p_omega d_a omega | E^b F_ab)``."""
    form = _resolve_form(state, form)
    g = state.grid
    geo = _Geometry(state)
    mixed = np.einsum("bc...,ca...->ba...", state.pi, state.q)  # pi^b_a
    # the density weight cancels the Gamma^b_bc term
    div = g.d(mixed[0], 0) + g.d(mixed[1], 1) - np.einsum("cba...,bc...->a...", geo.gamma, mixed)
    out = -2.0 * div + state.p_gamma * g.grad(state.gamma)
    if form == "wm":
        return out + state.p_omega * g.grad(state.omega)
    F = field_strength(state.A, g)
    return out + np.einsum("b...,ab...->a...", state.E, F)


def constraint_forms(state: CanonicalState) -> dict:
    """Both constraint forms; the Kaluza-Klein pair only when ``A`` is present."""
    out = {"H_wm": hamiltonian_constraint(state, "wm"), "Ha_wm": momentum_constraint(state, "wm")}
    if state.kk:
        out["H_kk"] = hamiltonian_constraint(state, "kk")
        out["Ha_kk"] = momentum_constraint(state, "kk")
    return out


def _resolve_form(state, form):
    if form == "auto":
        return "kk" if state.kk else "wm"
    if form not in ("wm", "kk"):
        raise ValueError(f"unknown constraint form {form!r}")
    if form == "kk" and not state.kk:
        raise GeometryError("Kaluza-Klein form needs A and E")
    return form


def twist_substitution(state: CanonicalState) -> CanonicalState:
    """Wave-map variables from ``(A, E)``: ``p_omega = F_12`` and ``E^a = eps^{ba} d_b omega``.

    ``omega`` must already be set consistently with ``E``; only ``p_omega`` is computed.
    """
    F = field_strength(state.A, state.grid)
    return replace(state, p_omega=F[0, 1])


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


def _lie_scalar(f, shift, g):
    return np.einsum("a...,a...->...", shift, g.grad(f))


def _lie_density(p, shift, g):
    return g.div(shift * p)


def evolution_rhs(state: CanonicalState, gauge: GaugeData) -> dict:
    """Time derivatives of the six wave-map fields under lapse ``N`` and shift ``N^a``."""
    if state.kk:
        raise GeometryError("evolution is implemented for the wave-map variables; drop A/E first")
    g = state.grid
    geo = _Geometry(state)
    N, X = gauge.N, gauge.shift
    mu, q, qinv, pi = geo.mu, state.q, geo.qinv, state.pi
    e4 = np.exp(4.0 * state.gamma)
    dgam, dom = g.grad(state.gamma), g.grad(state.omega)
    pipi, tr = _kinetic(state, geo)
    dX = g.grad(X)  # dX[c, a] = d_c N^a

    rates = {}
    rates["gamma"] = 0.25 * N * state.p_gamma / mu + _lie_scalar(state.gamma, X, g)
    rates["p_gamma"] = (4.0 * g.div(N * mu * np.einsum("ab...,b...->a...", qinv, dgam))
                        - 2.0 * N * e4 * state.p_omega**2 / mu
                        + 2.0 * N * mu / e4 * geo.norm2(dom)
                        + _lie_density(state.p_gamma, X, g))
    rates["omega"] = N * e4 * state.p_omega / mu + _lie_scalar(state.omega, X, g)
    rates["p_omega"] = (g.div(N * mu / e4 * np.einsum("ab...,b...->a...", qinv, dom))
                        + _lie_density(state.p_omega, X, g))

    pi_low = geo.lower2(pi)
    lie_q = (np.einsum("c...,cab...->ab...", X, geo.dq)
             + np.einsum("cb...,ac...->ab...", q, dX) + np.einsum("ac...,bc...->ab...", q, dX))
    rates["q"] = 2.0 * N / mu * (pi_low - q * tr) + lie_q

    pipi_up = np.einsum("ac...,cd...,db...->ab...", pi, q, pi)
    grad_sq = 2.0 * dgam[:, None] * dgam[None, :] + 0.5 / e4 * dom[:, None] * dom[None, :]
    stress = geo.raise2(grad_sq) - 0.5 * qinv * np.einsum("cd...,cd...->...", qinv, grad_sq)
    hess_up = geo.raise2(geo.hessian(N))
    lie_pi = (g.div(X[:, None, None] * pi[None])
              - np.einsum("cb...,ca...->ab...", pi, dX) - np.einsum("ac...,cb...->ab...", pi, dX))
    rates["pi"] = (-2.0 * N / mu * (pipi_up - pi * tr)
                   + 0.5 * N / mu * qinv * (pipi - tr**2)
                   + 0.5 * N / mu * qinv * (state.p_gamma**2 / 8.0 + 0.5 * e4 * state.p_omega**2)
                   + mu * (hess_up - qinv * geo.laplacian(N))
                   + N * mu * stress
                   + lie_pi)
    return rates


def _gauge_for(gauge, state):
    return gauge(state) if callable(gauge) else gauge


def euler_step(state: CanonicalState, gauge, dt: float) -> CanonicalState:
    """One forward-Euler step; ``gauge`` is ``GaugeData`` or a function of the state."""
    return state.advanced(evolution_rhs(state, _gauge_for(gauge, state)), dt)


def rk4_step(state: CanonicalState, gauge, dt: float) -> CanonicalState:
    """Classical RK4. A fixed ``GaugeData`` is frozen over the step; a callable
    ``gauge(state)`` (e.g. a lapse tied to ``gamma``) is re-evaluated at every stage."""
    def rhs(s):
        return evolution_rhs(s, _gauge_for(gauge, s))

    k1 = rhs(state)
    k2 = rhs(state.advanced(k1, dt / 2))
    k3 = rhs(state.advanced(k2, dt / 2))
    k4 = rhs(state.advanced(k3, dt))
    rates = {k: (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]) / 6.0 for k in k1}
    return state.advanced(rates, dt)


def propagation_rates(state: CanonicalState, gauge: GaugeData, H=None, Ha=None) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the constraint propagation equations.

    ``dH/dt = d_a(N^a H) + q^{ab} H_a d_b N + d_b(N q^{ab} H_a)`` and
    ``dH_a/dt = d_b(N^b H_a) + d_a N^b H_b + H d_a N``.
    """
    g = state.grid
    H = hamiltonian_constraint(state, "wm") if H is None else H
    Ha = momentum_constraint(state, "wm") if Ha is None else Ha
    N, X = gauge.N, gauge.shift
    qinv = _inverse(state.q)
    Ha_up = np.einsum("ab...,b...->a...", qinv, Ha)
    dN = g.grad(N)
    dH = g.div(X * H) + np.einsum("a...,a...->...", Ha_up, dN) + g.div(N * Ha_up)
    dHa = (np.stack([g.div(X * Ha[a]) for a in range(2)])
           + np.einsum("ab...,b...->a...", g.grad(X), Ha) + H * dN)
    return dH, dHa


def constraint_propagation_check(state: CanonicalState, gauge: GaugeData, dt: float,
                                 scheme: str = "forward") -> dict:
    """Numeric time derivative of ``(H, H_a)`` against the propagation equations.

    The state is advanced with one explicit step of ``evolution_rhs``; ``scheme``
    is ``"forward"`` (first order in ``dt``) or ``"central"`` (second order).
    """
    rates = evolution_rhs(state, gauge)
    H0, Ha0 = hamiltonian_constraint(state, "wm"), momentum_constraint(state, "wm")
    plus = state.advanced(rates, dt)
    Hp, Hap = hamiltonian_constraint(plus, "wm"), momentum_constraint(plus, "wm")
    if scheme == "forward":
        lhs_H, lhs_Ha = (Hp - H0) / dt, (Hap - Ha0) / dt
    elif scheme == "central":
        minus = state.advanced(rates, -dt)
        lhs_H = (Hp - hamiltonian_constraint(minus, "wm")) / (2 * dt)
        lhs_Ha = (Hap - momentum_constraint(minus, "wm")) / (2 * dt)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    if not (np.all(np.isfinite(lhs_H)) and np.all(np.isfinite(lhs_Ha))):
        raise GeometryError("constraint advance produced non-finite values")
    rhs_H, rhs_Ha = propagation_rates(state, gauge, H0, Ha0)
    mismatch = max(np.max(np.abs(lhs_H - rhs_H)), np.max(np.abs(lhs_Ha - rhs_Ha)))
    return {"lhs_H": lhs_H, "rhs_H": rhs_H, "lhs_Ha": lhs_Ha, "rhs_Ha": rhs_Ha, "mismatch": float(mismatch)}


# ---------------------------------------------------------------------------
# conformal gauge
# ---------------------------------------------------------------------------


def conformal_killing(h: np.ndarray, vector: np.ndarray, grid: Grid2D) -> np.ndarray:
    """``CK(h, V)^{ab} = nabla^a V^b + nabla^b V^a - h^{ab} nabla_c V^c``."""
    hinv = _inverse(h)
    gam = christoffel(h, hinv, _metric_derivatives(h, grid))
    nab = grid.grad(vector) + np.einsum("bca...,c...->ab...", gam, vector)  # nab[a, b] = nabla_a V^b
    up = np.einsum("ac...,cb...->ab...", hinv, nab)
    return up + np.swapaxes(up, 0, 1) - hinv * np.einsum("cc...->...", nab)


def conformal_gauge_residuals(state: CanonicalState, gauge: GaugeData, flat_tol: float = 1e-6) -> dict:
    """Constraints, mean-curvature rate and shift equation for ``q = e^{2 nu} h`` with flat ``h``.

    Returns ``H_conf`` (with the constant ``-2 mu_h`` term), ``H_conf_flat`` (without it; equals ``H``), ``Ha_conf`` (equals
    ``-H_a / 2``), ``dtau`` and ``ck_residual``.
    """
    if gauge.nu is None:
        raise GeometryError("conformal gauge needs the conformal factor nu")
    g = state.grid
    nu = gauge.nu
    h = state.q * np.exp(-2.0 * nu)
    if np.max(np.abs(np.einsum("ab...,ab...->...", _inverse(h), ricci_tensor(h, g)))) > flat_tol:
        raise GeometryError("e^{-2 nu} q is not flat")
    geo = _Geometry(state)
    hinv = _inverse(h)
    mu_h = np.sqrt(_det(h))
    pipi, tr = _kinetic(state, geo)
    tau = tr / geo.mu if gauge.tau is None else gauge.tau
    trace_free = state.pi - 0.5 * geo.qinv * tr
    varpi = np.einsum("ac...,cb...->ab...", trace_free, state.q)  # varpi^a_b
    vv = np.einsum("ab...,ba...->...", varpi, varpi)
    e4 = np.exp(4.0 * state.gamma)
    dgam, dom, dnu = g.grad(state.gamma), g.grad(state.omega), g.grad(nu)
    hnorm = lambda v: np.einsum("ab...,a...,b...->...", hinv, v, v)  # noqa: E731
    kinetic = vv + state.p_gamma**2 / 8.0 + 0.5 * e4 * state.p_omega**2
    H_flat = (np.exp(-2.0 * nu) / mu_h * kinetic - 0.5 * mu_h * np.exp(2.0 * nu) * tau**2
              + 2.0 * g.div(mu_h * np.einsum("ab...,b...->a...", hinv, dnu))
              + mu_h * (2.0 * hnorm(dgam) + 0.5 / e4 * hnorm(dom)))

    gam_h = christoffel(h, hinv, _metric_derivatives(h, g))
    div_varpi = (g.d(varpi[0], 0) + g.d(varpi[1], 1) - np.einsum("cba...,bc...->a...", gam_h, varpi))
    # the trace part of pi is mu tau / 2, whose covariant divergence is mu d tau / 2
    Ha_conf = (div_varpi + 0.5 * np.exp(2.0 * nu) * mu_h * g.grad(tau)
               - 0.5 * (state.p_gamma * dgam + state.p_omega * dom))

    N, X = gauge.N, gauge.shift
    dtau = (-geo.laplacian(N) + N / geo.mu**2 * (pipi + state.p_gamma**2 / 8.0 + 0.5 * e4 * state.p_omega**2)
            + _lie_scalar(tau, X, g))
    ck = 2.0 * N * trace_free + mu_h * conformal_killing(h, X, g)
    return {"H_conf": H_flat - 2.0 * mu_h, "H_conf_flat": H_flat, "Ha_conf": Ha_conf, "dtau": dtau,
            "ck_residual": ck, "tau": tau}


# ---------------------------------------------------------------------------
# Weyl fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeylADM:
    """Gauge-invariant mixed components of the electric and magnetic Weyl densities.

    ``E_ab`` holds ``E^{ab}``, ``E_3a`` holds ``E_3^a``; the same for ``B``.
    """

    E_ab: np.ndarray
    E_3a: np.ndarray
    E_33: np.ndarray
    B_ab: np.ndarray
    B_3a: np.ndarray
    B_33: np.ndarray

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _kk_parts(state):
    if state.kk:
        return state.A, state.E, field_strength(state.A, state.grid)
    shape = state.grid.shape
    return np.zeros((2,) + shape), np.zeros((2,) + shape), np.zeros((2, 2) + shape)


def weyl_electric(state: CanonicalState) -> dict:
    """``E^{ab}``, ``E_3^a``, ``E_33`` from the reduced canonical data."""
    g = state.grid
    geo = _Geometry(state)
    mu, q, qinv, pi = geo.mu, state.q, geo.qinv, state.pi
    _, E, F = _kk_parts(state)
    gam = state.gamma
    eg = np.exp(gam)
    dgam = g.grad(gam)
    dgam_up = np.einsum("ab...,b...->a...", qinv, dgam)
    tr = np.einsum("ab...,ab...->...", q, pi)
    p = state.p_gamma

    ricci_up = geo.raise2(geo.ricci)
    hess_up = geo.raise2(geo.hessian(gam))
    lap = np.einsum("ab...,ab...->...", qinv, geo.hessian(gam))
    FF = np.einsum("ac...,df...,be...,ed...,cf...->ab...", qinv, qinv, qinv, F, F)
    E_ab = (eg**3 * mu * (ricci_up - hess_up + qinv * lap - 3.0 * dgam_up[:, None] * dgam_up[None, :]
                          + qinv * geo.norm2(dgam) - 0.5 * eg**4 * FF)
            - eg / mu * (-0.5 * eg**2 * pi * (0.5 * p + 2.0 * tr)
                         + eg**2 * np.einsum("cd...,ad...,bc...->ab...", q, pi, pi)
                         + 0.25 / eg**2 * E[:, None] * E[None, :]))

    F_up = geo.raise2(F)  # F^{ac}
    div_F = np.stack([g.div(mu * F_up[a]) for a in range(2)]) / mu  # nabla_b F^{ab}
    E_3a = (eg**5 * mu * (0.5 * div_F - 2.5 * np.einsum("b...,ac...,bc...->a...", dgam_up, qinv, F))
            - eg / mu * (0.5 * np.einsum("c...,bc...,ab...->a...", E, q, pi) + p * E / 8.0))

    E_33 = (-eg / mu * (0.25 / eg**2 * np.einsum("ab...,a...,b...->...", q, E, E) + 0.25 * eg**2 * p * (0.5 * p + tr))
            - eg**3 * (g.div(mu * dgam_up) + mu * geo.norm2(dgam)
                       + 0.25 * eg**4 * mu * np.einsum("ac...,bd...,bc...,ad...->...", qinv, qinv, F, F)))
    return {"E_ab": E_ab, "E_3a": E_3a, "E_33": E_33}


def weyl_magnetic(state: CanonicalState) -> dict:
    """``B^{ab}``, ``B_3^a``, ``B_33``; ``eps`` is the 2D symbol with ``eps^{12} = 1``."""
    g = state.grid
    geo = _Geometry(state)
    mu, q, qinv, pi = geo.mu, state.q, geo.qinv, state.pi
    _, E, F = _kk_parts(state)
    eg = np.exp(state.gamma)
    dgam = g.grad(state.gamma)
    tr = np.einsum("ab...,ab...->...", q, pi)
    p = state.p_gamma
    curl = -F[0, 1]  # eps^{mn} d_n A_m
    eps = np.broadcast_to(EPS2[..., None, None], (2, 2) + g.shape)

    Eu = E / mu
    nabla_Eu = g.grad(Eu) + np.einsum("acd...,d...->ca...", geo.gamma, Eu)  # [c, a] = nabla_c (E^a / mu)
    inner = (0.5 * eg**5 / mu * curl * np.einsum("ce...,de...,af...,fd...->ac...", q, pi, qinv, eps)
             - eg / mu * np.einsum("d...,f...,af...,dc...->ac...", E, dgam, qinv, q)
             + 0.5 * eg / mu * np.einsum("d...,d...->...", E, dgam) * np.eye(2)[..., None, None]
             - 0.5 * eg**5 / mu * (0.5 * p + tr) * curl * np.einsum("af...,fc...->ac...", qinv, eps)
             - 0.5 * eg * np.swapaxes(nabla_Eu, 0, 1))
    B_ab = np.einsum("bc...,ac...->ab...", eps, inner)

    mixed = np.einsum("bd...,dc...->bc...", pi, q)  # pi^b_c
    inner3 = (-eg**3 / mu * np.einsum("b...,bc...->c...", dgam, mixed - np.eye(2)[..., None, None] * tr)
              - 0.25 * eg**3 / mu * np.einsum("b...,cb...->c...", E, F)
              + 0.25 * g.grad(eg**3 * p / mu))
    B_3a = np.einsum("ca...,c...->a...", eps, inner3)

    E_low = np.einsum("ab...,b...->a...", q, E)
    dE = g.grad(0.5 / eg / mu * E_low)  # [c, a]
    inner33 = (eg**2 * dE - 0.5 * eg / mu * dgam[:, None] * E_low[None, :]
               + 0.5 * eg**5 / mu * (0.5 * p + tr) * F
               - 0.5 * eg**5 / mu * np.einsum("fa...,cf...->ca...", mixed, F))
    B_33 = np.einsum("ac...,ca...->...", eps, inner33)
    return {"B_ab": B_ab, "B_3a": B_3a, "B_33": B_33}


def weyl_adm(state: CanonicalState) -> WeylADM:
    return WeylADM(**weyl_electric(state), **weyl_magnetic(state))


def _adapted_metric(state):
    """Spatial metric of the 3-slice in the basis ``(dx^1, dx^2, dx^3 + A)``: block diagonal."""
    e2 = np.exp(2.0 * state.gamma)
    return state.q / e2, e2


def bel_robinson_density(weyl: WeylADM, state: CanonicalState, densitized: bool = False) -> np.ndarray:
    """``E.E + B.B`` contracted with the 3-metric ``e^{-2 gamma} q + e^{2 gamma} (dx^3 + A)^2``.

    By default the weight-two density is divided by the squared 3-volume element,
    giving the scalar ``Q(n, n, n, n)``.
    """
    qh, f = _adapted_metric(state)
    total = 0.0
    for two, three, three3 in ((weyl.E_ab, weyl.E_3a, weyl.E_33), (weyl.B_ab, weyl.B_3a, weyl.B_33)):
        total = total + (np.einsum("ac...,bd...,ab...,cd...->...", qh, qh, two, two)
                         + 2.0 / f * np.einsum("ab...,a...,b...->...", qh, three, three)
                         + three3**2 / f**2)
    if densitized:
        return total
    vol2 = _det(state.q) * np.exp(-2.0 * state.gamma)  # det of the 3-metric
    return total / vol2


def lifted_weyl(state: CanonicalState) -> WeylADM:
    """Independent route: rebuild the 3-slice of the 4-metric and apply the 3+1 formulas.

    The extrinsic curvature comes from the Hamilton equations with unit lapse and
    zero shift (the Weyl fields do not depend on the gauge). ``E^{ij}`` is the
    densitized ``R^{ij} + K K^{ij} - K^i_k K^{kj}`` and ``B^{ij} = eps^{mlj} D_l K_m^i``
    with the Levi-Civita symbol, both in coordinates ``(x1, x2, x3)``.
    """
    g = state.grid
    shape = g.shape
    A, E, _ = _kk_parts(state)
    geo = _Geometry(state)
    mu, q = geo.mu, state.q
    e2 = np.exp(2.0 * state.gamma)
    e4 = e2 * e2
    tr = np.einsum("ab...,ab...->...", q, state.pi)

    def metric3(qq, gam, AA):
        w = np.exp(2.0 * gam)
        out = np.empty((3, 3) + shape)
        out[:2, :2] = qq / w + w * AA[:, None] * AA[None, :]
        out[:2, 2] = out[2, :2] = w * AA
        out[2, 2] = w
        return out

    qbar = metric3(q, state.gamma, A)
    # Hamilton equations with N = 1 and no shift
    dq = 2.0 / mu * (geo.lower2(state.pi) - q * tr)
    dgam = 0.25 * state.p_gamma / mu
    dA = np.einsum("ab...,b...->a...", q, E) / (mu * e4)
    dqbar = np.empty_like(qbar)
    dqbar[:2, :2] = (dq - 2.0 * dgam * q) / e2 + e2 * (2.0 * dgam * A[:, None] * A[None, :]
                                                      + dA[:, None] * A[None, :] + A[:, None] * dA[None, :])
    dqbar[:2, 2] = dqbar[2, :2] = e2 * (2.0 * dgam * A + dA)
    dqbar[2, 2] = 2.0 * dgam * e2
    lapse = np.exp(-state.gamma)
    K = dqbar / (2.0 * lapse)

    qinv = _inverse(qbar)
    vol = np.sqrt(_det(qbar))
    ric = ricci_tensor(qbar, g)
    K_mixed = np.einsum("ik...,kj...->ij...", qinv, K)  # K^i_j
    K_up = np.einsum("ik...,jl...,kl...->ij...", qinv, qinv, K)
    trK = np.einsum("ii...->...", K_mixed)
    Eup = vol * (np.einsum("ik...,jl...,kl...->ij...", qinv, qinv, ric) + trK * K_up
                 - np.einsum("ik...,kj...->ij...", K_mixed, K_up))

    gam3 = christoffel(qbar, qinv, _metric_derivatives(qbar, g))
    dK = np.zeros((3,) + K.shape)
    dK[0], dK[1] = g.d(K, 0), g.d(K, 1)
    DK = dK - np.einsum("plm...,pi...->lmi...", gam3, K) - np.einsum("pli...,mp...->lmi...", gam3, K)  # D_l K_mi
    DK_mixed = np.einsum("lmk...,ki...->lmi...", DK, qinv)  # D_l K_m^i
    eps3 = np.zeros((3, 3, 3))
    for (a, b, c), s in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps3[a, b, c] = s
    Bup = np.einsum("mlj,lmi...->ij...", eps3, DK_mixed)

    def mixed_parts(T):
        # adapted-basis components: T^{ab}, T_3^a = qbar_3i T^{ia}, T_33
        T3a = np.einsum("i...,ia...->a...", qbar[2], T[:, :2])
        T33 = np.einsum("i...,j...,ij...->...", qbar[2], qbar[2], T)
        return T[:2, :2], T3a, T33

    Ea, E3, E33 = mixed_parts(Eup)
    Ba, B3, B33 = mixed_parts(Bup)
    return WeylADM(Ea, E3, E33, Ba, B3, B33)


# ---------------------------------------------------------------------------
# induced data
# ---------------------------------------------------------------------------


def kasner_slice(p1: float, p2: float, p3: float, t: float, grid: Grid2D | None = None):
    """Exact reduced data of Kasner on the slice ``t``; ``x3`` (exponent ``p3``) is the fibre.

    Returns ``(state, gauge)`` with the induced lapse ``N = t^{p3} = e^{gamma}``.
    """
    grid = grid or Grid2D.square(16)
    a1, a2 = p1 + p3, p2 + p3
    q = np.diag([t ** (2 * a1), t ** (2 * a2)])
    mu = t ** (a1 + a2)
    lapse = t**p3
    scale = mu / (lapse * t)
    pi = -scale * np.diag([a2 * t ** (-2 * a1), a1 * t ** (-2 * a2)])
    state = CanonicalState(grid, q, pi, p3 * np.log(t), 4.0 * p3 * mu / (lapse * t))
    return state, GaugeData(grid, N=lapse)


def induced_state(metric4, t: float, grid: Grid2D, dt: float = 1e-4) -> tuple[CanonicalState, GaugeData]:
    """Reduced canonical data on the slice ``t`` of a 4-metric with Killing field ``d/dx3``.

    ``metric4(t, X, Y)`` returns the ``(4, 4, nx, ny)`` components in coordinates
    ``(t, x1, x2, x3)``. Time derivatives use a five-point stencil of step ``dt``.
    The potential ``A`` is included (with ``A_0`` gauge term) when it is not identically zero.
    """
    X, Y = grid.coords()

    def split(tt):
        gb = np.asarray(metric4(tt, X, Y), dtype=float)
        f = gb[3, 3]
        A = gb[:3, 3] / f
        g3 = f * (gb[:3, :3] - f * A[:, None] * A[None, :])
        return g3, 0.5 * np.log(f), A

    g3, gamma, A = split(t)
    steps = [split(t + k * dt) for k in (-2, -1, 1, 2)]

    def ddt(i):
        m2, m1, p1, p2 = (s[i] for s in steps)
        return (m2 - 8 * m1 + 8 * p1 - p2) / (12 * dt)

    q = g3[1:, 1:]
    shift_low = g3[0, 1:]
    qinv = _inverse(q)
    shift = np.einsum("ab...,b...->a...", qinv, shift_low)
    N = np.sqrt(np.einsum("a...,a...->...", shift, shift_low) - g3[0, 0])
    mu = np.sqrt(_det(q))
    dq_t = ddt(0)[1:, 1:]
    base = CanonicalState(grid, q, np.zeros_like(q), gamma, np.zeros_like(gamma))
    dq_lie = evolution_rhs(base, GaugeData(grid, N=N, shift=shift))["q"]  # pure Lie transport at pi = 0
    K = (dq_t - dq_lie) / (2 * N)
    trK = np.einsum("ab...,ab...->...", qinv, K)
    pi = mu * (np.einsum("ac...,bd...,cd...->ab...", qinv, qinv, K) - qinv * trK)
    dgam_t = ddt(1)
    p_gamma = 4 * mu / N * (dgam_t - np.einsum("a...,a...->...", shift, grid.grad(gamma)))
    state = CanonicalState(grid, q, pi, gamma, p_gamma)
    if np.max(np.abs(A)) > 0:
        Fs = field_strength(A[1:], grid)
        F0 = ddt(2)[1:] - grid.grad(A[0])  # F_{0a}
        Et = F0 - np.einsum("c...,ca...->a...", shift, Fs)
        E = np.exp(4 * gamma) * mu / N * np.einsum("ab...,b...->a...", qinv, Et)
        state = replace(state, A=A[1:], E=E)
    return state, GaugeData(grid, N=N, shift=shift)


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def _state_arrays(state):
    names = WM_FIELDS + (KK_FIELDS if state.kk else ())
    return {k: getattr(state, k) for k in names}


def save_state(state: CanonicalState, path) -> Path:
    """``.json`` (header plus nested lists) or ``.npz`` (binary with the same header)."""
    path = Path(path)
    g = state.grid
    header = {"nx": g.nx, "ny": g.ny, "hx": g.hx, "hy": g.hy, "fields": list(_state_arrays(state))}
    arrays = _state_arrays(state)
    if path.suffix == ".json":
        payload = {"header": header, "fields": {k: v.tolist() for k, v in arrays.items()}}
        path.write_text(json.dumps(payload, sort_keys=True))
    elif path.suffix == ".npz":
        np.savez(path, header=json.dumps(header, sort_keys=True), **arrays)
    else:
        raise ValueError(f"unsupported state format {path.suffix!r} (use .json or .npz)")
    return path


def load_state(path) -> CanonicalState:
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        header, data = payload["header"], {k: np.asarray(v) for k, v in payload["fields"].items()}
    elif path.suffix == ".npz":
        with np.load(path) as z:
            header = json.loads(str(z["header"]))
            data = {k: z[k] for k in header["fields"]}
    else:
        raise ValueError(f"unsupported state format {path.suffix!r}")
    grid = Grid2D(header["nx"], header["ny"], header["hx"], header["hy"])
    return CanonicalState(grid, **{k: data[k] for k in header["fields"]})


def export_csv(fields_: dict, grid: Grid2D, path) -> Path:
    """One row per node: ``i, j, x, y`` then every component of every field."""
    path = Path(path)
    X, Y = grid.coords()
    cols, names = [], []
    for name, arr in fields_.items():
        arr = np.asarray(arr)
        for idx in np.ndindex(arr.shape[:-2]):
            names.append(name + "".join(f"_{i + 1}" for i in idx))
            cols.append(arr[idx].ravel())
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y"] + names)
        ii, jj = np.meshgrid(np.arange(grid.nx), np.arange(grid.ny), indexing="ij")
        for row in range(grid.nx * grid.ny):
            w.writerow([ii.ravel()[row], jj.ravel()[row], repr(float(X.ravel()[row])), repr(float(Y.ravel()[row]))]
                       + [repr(float(c[row])) for c in cols])
    return path


__all__ = [
    "CanonicalState", "GaugeData", "Grid2D", "WeylADM", "bel_robinson_density", "christoffel", "conformal_gauge_residuals",
    "conformal_killing", "constraint_forms", "constraint_propagation_check", "dedensitize", "densitize", "euler_step",
    "evolution_rhs", "export_csv", "field_strength", "hamiltonian_constraint", "induced_state", "kasner_slice",
    "lifted_weyl", "load_state", "mean_curvature", "momentum_constraint", "propagation_rates", "ricci_tensor",
    "rk4_step", "save_state", "twist_substitution", "weyl_adm", "weyl_electric", "weyl_magnetic",
]
