"""Connection and curvature of an orthonormal coframe by Cartan's method.

Index conventions (frame indices are orthonormal, coordinate ones are not):

* ``E[a, mu] = e^a_mu`` and ``V[mu, a] = e_a^mu`` with ``V = E^{-1}``.
* ``theta[a, b, mu]``: connection one-forms, ``de^a = -theta^a_b ^ e^b``.
* ``omega[a, b, c] = theta^a_b(e_c)``, so ``nabla_{e_c} e_b = omega[a, b, c] e_a``.
* ``F[a, b, mu, nu]``: curvature two-forms ``d theta + theta ^ theta`` in
  coordinate legs; ``R[a, b, c, d] = F[a, b, mu, nu] V[mu, c] V[nu, d]``.
* ``R_{bd} = R^a_{bad}`` and ``Scal = eta^{bd} R_{bd}``.

Everything is assembled from point functions ``fn(x, params)`` and compiled
once per (coframe family, derivative mode, step).  Derivatives of the coframe
come from forward-mode AD (``"ad"``) or fourth-order central differences
(``"fd"``); covariant derivatives of curvature (Bianchi, Bel-Robinson
divergence, Penrose residual) always difference the analytic curvature, which
is how those checks stay independent of the code they test.
"""

from __future__ import annotations

import csv
import functools
import itertools
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from .derivatives import MODES, jacobian
from .errors import GeometryError
from .frame_algebra import CoFrame, FormField, MetricField, ScalarField

DEFAULT_FD_STEP = 1e-3


# ---------------------------------------------------------------------------
# compiled pipelines


class _Pipeline:
    """Point functions for one coframe family; compiled lazily and memoised."""

    def __init__(self, matrix_fn: Callable, signature: tuple, mode: str, step: float, traceable: bool):
        if mode not in MODES:
            raise ValueError(f"unknown derivative mode {mode!r}")
        self.mode, self.step, self.traceable = mode, step, traceable
        self.signature = signature
        eta = jnp.diag(jnp.asarray(signature, dtype=float))
        self.eta = eta
        jac = functools.partial(jacobian, mode=mode, step=step, batched=traceable)
        E = matrix_fn

        def V(x, p):
            return jnp.linalg.inv(E(x, p))

        def structure(x, p):
            # C^a_{bc} = -(de^a)(e_b, e_c)
            dE = jac(E)(x, p)  # dE[a, m, n] = d_n E[a, m]
            de = jnp.swapaxes(dE, 1, 2) - dE
            v = V(x, p)
            return -jnp.einsum("amn,mb,nc->abc", de, v, v)

        def omega(x, p):
            c_low = jnp.einsum("ad,dbc->abc", eta, structure(x, p))
            w_low = 0.5 * (jnp.einsum("adc->acd", c_low) - jnp.einsum("dca->acd", c_low)
                           + jnp.einsum("cad->acd", c_low))
            # already antisymmetric in (a, c); this makes it exact in floating point
            w_low = 0.5 * (w_low - jnp.swapaxes(w_low, 0, 1))
            return jnp.einsum("ad,dbc->abc", eta, w_low)

        def theta(x, p):
            return jnp.einsum("abc,cm->abm", omega(x, p), E(x, p))

        def F(x, p):
            th = theta(x, p)
            dth = jac(theta)(x, p)  # dth[a, b, m, n] = d_n theta[a, b, m]
            d_theta = jnp.swapaxes(dth, 2, 3) - dth
            sq = jnp.einsum("acm,cbn->abmn", th, th)
            return d_theta + sq - jnp.swapaxes(sq, 2, 3)

        def riem(x, p):
            v = V(x, p)
            return jnp.einsum("abmn,mc,nd->abcd", F(x, p), v, v)

        def riem_low(x, p):
            return jnp.einsum("ae,ebcd->abcd", eta, riem(x, p))

        def ricci_frame(x, p):
            return jnp.einsum("abad->bd", riem(x, p))

        def scal(x, p):
            return jnp.einsum("bd,bd->", eta, ricci_frame(x, p))

        def first_structure(x, p):
            # de^a + theta^a_c ^ e^c, coordinate components [a, mu, nu]
            dE = jac(E)(x, p)
            de = jnp.swapaxes(dE, 1, 2) - dE
            w = jnp.einsum("acm,cn->amn", theta(x, p), E(x, p))
            return de + w - jnp.swapaxes(w, 1, 2)

        def metric(x, p):
            e = E(x, p)
            return e.T @ eta @ e

        self.raw = dict(E=E, V=V, structure=structure, omega=omega, theta=theta, F=F, riem=riem,
                        riem_low=riem_low, ricci_frame=ricci_frame, scal=scal,
                        first_structure=first_structure, metric=metric)
        if len(signature) == 4:
            self.raw["weyl_low"] = lambda x, p: weyl_from_riemann(riem_low(x, p), eta)
            self.raw["bel_robinson"] = lambda x, p: bel_robinson_from_weyl(self.raw["weyl_low"](x, p), eta)
        self._compiled: dict = {}

    def get(self, name: str) -> Callable:
        if name not in self._compiled:
            fn = self.raw[name]
            self._compiled[name] = jax.jit(fn) if self.traceable else fn
        return self._compiled[name]

    def derived(self, key, build: Callable) -> Callable:
        """Memoise a function built on top of the raw ones (e.g. FD covariant derivatives)."""
        if key not in self._compiled:
            fn = build()
            self._compiled[key] = jax.jit(fn) if self.traceable else fn
        return self._compiled[key]

    def frame_nabla(self, name: str, rank: int) -> Callable:
        """``(x, p, h) -> (nabla_e T)_{a1..ak}`` of an all-lower frame tensor, derivative index last.

        The difference step ``h`` is a runtime argument so one compile serves
        a whole convergence study.
        """

        def build():
            T = self.raw[name]
            V, omega = self.raw["V"], self.raw["omega"]

            def nabla(x, p, h):
                t = T(x, p)
                dT = jacobian(T, "fd", h, batched=self.traceable)
                out = jnp.tensordot(dT(x, p), V(x, p), axes=([rank], [0]))
                om = omega(x, p)
                for i in range(rank):
                    term = jnp.tensordot(t, om, axes=([i], [0]))  # (..others.., a_i, e)
                    out = out - jnp.moveaxis(term, -2, i)
                return out

            return nabla

        return self.derived(("nabla", name), build)


@functools.lru_cache(maxsize=None)
def _pipeline(matrix_fn, signature, mode, step, traceable) -> _Pipeline:
    return _Pipeline(matrix_fn, signature, mode, step, traceable)


def _resolve_mode(coframe: CoFrame, mode: str | None) -> str:
    if mode is None:
        return "ad" if coframe.traceable else "fd"
    if mode == "ad" and not coframe.traceable:
        raise GeometryError(f"coframe {coframe.name!r} is not traceable; use mode='fd'")
    if mode not in MODES:
        raise ValueError(f"unknown derivative mode {mode!r}; expected one of {MODES}")
    return mode


def _as_np(a) -> np.ndarray:
    return np.asarray(a, dtype=float)


# ---------------------------------------------------------------------------
# algebraic building blocks (shared with the reduction module)


def weyl_from_riemann(r_low, eta):
    """Trace-free part of an all-lower 4D Riemann tensor in an orthonormal frame."""
    ric = jnp.einsum("ac,abcd->bd", eta, r_low)
    s = jnp.einsum("bd,bd->", eta, ric)
    e = eta
    kulkarni = (jnp.einsum("ac,bd->abcd", e, ric) - jnp.einsum("ad,bc->abcd", e, ric)
                - jnp.einsum("bc,ad->abcd", e, ric) + jnp.einsum("bd,ac->abcd", e, ric))
    gg = jnp.einsum("ac,bd->abcd", e, e) - jnp.einsum("ad,bc->abcd", e, e)
    return r_low - 0.5 * kulkarni + s / 6.0 * gg


def christoffel_symbols(g, dg):
    """``Gamma^l_{mn}`` from ``g`` and ``dg[m, n, l] = d_l g_mn``."""
    low = 0.5 * (dg + jnp.einsum("snm->smn", dg) - jnp.einsum("mns->smn", dg))
    return jnp.einsum("ls,smn->lmn", jnp.linalg.inv(g), low)


def bel_robinson_from_weyl(w, eta):
    """``W_{a m c n} W_b^m_d^n + W_{a m d n} W_b^m_c^n - (1/8) g_ab g_cd |W|^2``."""
    inv = eta  # orthonormal: eta is its own inverse
    w_up = jnp.einsum("mk,nl,bkdl->bmdn", inv, inv, w)  # W_b^m_d^n
    sq = jnp.einsum("abcd,ae,bf,cg,dh,efgh->", w, inv, inv, inv, inv, w)
    q = jnp.einsum("amcn,bmdn->abcd", w, w_up) + jnp.einsum("amdn,bmcn->abcd", w, w_up)
    return q - 0.125 * jnp.einsum("ab,cd->abcd", eta, eta) * sq


# ---------------------------------------------------------------------------
# connection


class SpinConnection:
    """Torsion-free, metric-compatible connection one-forms of a coframe.

    Built algebraically from the structure coefficients, so the lowered
    connection is antisymmetric in its frame pair by construction.
    """

    def __init__(self, coframe: CoFrame, mode: str | None = None, fd_step: float | None = None):
        self.coframe = coframe
        self.chart = coframe.chart
        self.mode = _resolve_mode(coframe, mode)
        self.fd_step = float(fd_step if fd_step is not None else
                             (coframe.fd_step if self.mode == "fd" else DEFAULT_FD_STEP))

    # nested FD levels needed by each quantity (FD mode only)
    _LEVELS = {"E": 0, "V": 0, "metric": 0, "structure": 1, "omega": 1, "theta": 1, "first_structure": 1}

    def pipeline(self, x, levels: int = 2) -> _Pipeline:
        step = self.fd_step
        if self.mode == "fd":
            step = self.chart.fit_step(x, step, levels)
        else:
            step = 0.0
        return _pipeline(self.coframe.matrix_fn, self.chart.signature, self.mode, step, self.coframe.traceable)

    def evaluate(self, name: str, x, levels: int | None = None) -> np.ndarray:
        x = self.chart.require(x)
        self.coframe.matrix(x)
        check = getattr(self.coframe, "signature_check", None)
        if check is not None:
            check(x)
        levels = self._LEVELS.get(name, 2) if levels is None else levels
        fn = self.pipeline(x, max(levels, 1)).get(name)
        return _as_np(fn(jnp.asarray(x), self.coframe.params))

    def evaluate_many(self, name: str, points) -> np.ndarray:
        """Vectorised evaluation (AD mode, traceable coframes) over an ``(n, dim)`` array."""
        points = np.asarray(points, dtype=float)
        if self.mode != "ad":
            return np.stack([self.evaluate(name, p) for p in points])
        for p in points:
            self.chart.require(p)
        pipe = self.pipeline(points[0])
        fn = pipe.derived(("many", name), lambda: jax.vmap(pipe.raw[name], in_axes=(0, None)))
        return _as_np(fn(jnp.asarray(points), self.coframe.params))

    def __call__(self, x) -> np.ndarray:
        """``theta[a, b, mu]``."""
        return self.evaluate("theta", x)

    def frame_legs(self, x) -> np.ndarray:
        """``omega[a, b, c] = theta^a_b(e_c)``."""
        return self.evaluate("omega", x)

    def lowered(self, x) -> np.ndarray:
        """``theta_{a b mu}``; antisymmetric in ``(a, b)``."""
        return np.einsum("ad,dbm->abm", self.chart.eta, self(x))

    def structure_coefficients(self, x) -> np.ndarray:
        """``C^a_{bc}`` with ``de^a = -(1/2) C^a_{bc} e^b ^ e^c``."""
        return self.evaluate("structure", x)

    def first_structure_residual(self, x) -> np.ndarray:
        """Components of ``de^a + theta^a_c ^ e^c``; zero up to discretisation."""
        return self.evaluate("first_structure", x)

    def form(self, a: int, b: int) -> FormField:
        """``theta^a_b`` as a one-form field."""
        comps = {}
        for mu in range(self.chart.dim):
            comps[(mu,)] = ScalarField(lambda x, mu=mu: self(np.asarray(x))[a, b, mu], chart=self.chart,
                                       fd_step=max(self.fd_step, 1e-4))
        return FormField(self.chart, 1, comps)


def solve_spin_connection(coframe: CoFrame, mode: str | None = None, fd_step: float | None = None) -> SpinConnection:
    """Connection one-forms from the structure coefficients of ``coframe``."""
    return SpinConnection(coframe, mode, fd_step)


# ---------------------------------------------------------------------------
# curvature


class CurvatureField:
    """Riemann curvature of a coframe via the second structural equation."""

    def __init__(self, theta: SpinConnection):
        self.theta = theta
        self.coframe = theta.coframe
        self.chart = theta.chart

    def frame(self, x) -> np.ndarray:
        """``R^a_{bcd}`` in the orthonormal frame."""
        return self.theta.evaluate("riem", x)

    def lowered(self, x) -> np.ndarray:
        return self.theta.evaluate("riem_low", x)

    def mixed(self, x) -> np.ndarray:
        """``F^a_{b mu nu}``: frame pair, coordinate two-form legs."""
        return self.theta.evaluate("F", x)

    def frame_many(self, points) -> np.ndarray:
        return self.theta.evaluate_many("riem", points)

    def coordinate(self, x) -> np.ndarray:
        """``R^rho_{sigma mu nu}`` in coordinate indices."""
        e = self.coframe.matrix(x)
        v = np.linalg.inv(e)
        return np.einsum("ra,abmn,bs->rsmn", v, self.mixed(x), e)

    def two_form(self, a: int, b: int, x) -> np.ndarray:
        """Coefficients ``K_{cd}`` with ``Riem^a_b = sum_{c<d} K_{cd} e^c ^ e^d``."""
        return self.frame(x)[a, b]

    # -- identities ---------------------------------------------------------

    def first_bianchi(self, x) -> np.ndarray:
        r = self.frame(x)
        return r + np.einsum("acdb->abcd", r) + np.einsum("adbc->abcd", r)

    def _require_analytic(self, what):
        if self.theta.mode != "ad":
            raise GeometryError(f"{what} needs analytic coframe derivatives (mode 'ad'); "
                                "finite-difference-only metrics are not supported")

    def covariant_derivative(self, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        """``(nabla_e R)_{abcd}`` with the derivative index last."""
        self._require_analytic("covariant derivative of curvature")
        x = self.chart.require(x)
        h = self.chart.fit_step(x, step, 1)
        fn = self.theta.pipeline(x).frame_nabla("riem_low", 4)
        return _as_np(fn(jnp.asarray(x), self.coframe.params, h))

    def second_bianchi(self, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        """Cyclic sum ``nabla_e R_{abcd} + nabla_c R_{abde} + nabla_d R_{abec}``."""
        d = self.covariant_derivative(x, step)
        return d + np.einsum("abdec->abcde", d) + np.einsum("abecd->abcde", d)

    def contracted_bianchi(self, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        """``eta^{ae} nabla_e R_{abcd}``; vanishes in vacuum."""
        d = self.covariant_derivative(x, step)
        return np.einsum("ae,abcde->bcd", self.chart.eta, d)

    # -- output -------------------------------------------------------------

    def write_csv(self, path, points, threshold: float = 0.0):
        """Frame components as rows ``(coords..., a, b, c, d, value)``."""
        names = list(self.chart.coord_names)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["a", "b", "c", "d", "value"])
            for x in points:
                r = self.frame(x)
                for idx in itertools.product(range(self.chart.dim), repeat=4):
                    if abs(r[idx]) > threshold:
                        w.writerow([f"{v:.17g}" for v in x] + list(idx) + [f"{r[idx]:.17g}"])


def curvature_two_forms(coframe: CoFrame, theta: SpinConnection | None = None) -> CurvatureField:
    """Curvature two-forms ``d theta + theta ^ theta`` of ``coframe``."""
    if theta is None:
        theta = solve_spin_connection(coframe)
    elif theta.coframe is not coframe:
        raise GeometryError("spin connection was built for a different coframe")
    return CurvatureField(theta)


class Contractions:
    """Ricci, scalar and Einstein tensors of a curvature field."""

    def __init__(self, curv: CurvatureField):
        self.curv = curv
        self.chart = curv.chart

    def ricci_frame(self, x) -> np.ndarray:
        return self.curv.theta.evaluate("ricci_frame", x)

    def ricci(self, x) -> np.ndarray:
        e = self.curv.coframe.matrix(x)
        return e.T @ self.ricci_frame(x) @ e

    def scalar(self, x) -> float:
        return float(self.curv.theta.evaluate("scal", x))

    def einstein(self, x) -> np.ndarray:
        g = self.curv.coframe.metric()(x)
        return self.ricci(x) - 0.5 * self.scalar(x) * g


def contract_curvature(curv: CurvatureField) -> Contractions:
    return Contractions(curv)


# ---------------------------------------------------------------------------
# independent coordinate oracle


class CoordinateCurvature:
    """Riemann tensor from Christoffel symbols of ``g_{mu nu}``; used as a test oracle."""

    def __init__(self, metric: MetricField, mode: str = "ad", fd_step: float = DEFAULT_FD_STEP):
        if mode == "ad" and not metric.traceable:
            raise GeometryError("metric is not traceable; use mode='fd'")
        self.metric = metric
        self.chart = metric.chart
        self.mode = mode
        self.fd_step = fd_step

    def _fn(self, name, x):
        step = self.chart.fit_step(x, self.fd_step, 2) if self.mode == "fd" else 0.0
        return _oracle_functions(self.metric.fn, self.mode, step, self.metric.traceable)[name]

    def christoffel(self, x) -> np.ndarray:
        x = self.chart.require(x)
        self.metric(x)
        return _as_np(self._fn("christoffel", x)(jnp.asarray(x), self.metric.params))

    def coordinate(self, x) -> np.ndarray:
        """``R^rho_{sigma mu nu}``."""
        x = self.chart.require(x)
        self.metric(x)
        return _as_np(self._fn("riemann", x)(jnp.asarray(x), self.metric.params))

    def ricci(self, x) -> np.ndarray:
        return np.einsum("rsrn->sn", self.coordinate(x))

    def scalar(self, x) -> float:
        return float(np.einsum("sn,sn->", np.linalg.inv(self.metric(x)), self.ricci(x)))

    def in_frame(self, coframe: CoFrame, x) -> np.ndarray:
        """Convert to ``R^a_{bcd}`` with respect to ``coframe``."""
        e = coframe.matrix(x)
        v = np.linalg.inv(e)
        return np.einsum("ar,rsmn,sb,mc,nd->abcd", e, self.coordinate(x), v, v, v)


@functools.lru_cache(maxsize=None)
def _oracle_functions(g, mode, step, traceable):
    jac = functools.partial(jacobian, mode=mode, step=step, batched=traceable)

    def christoffel(x, p):
        return christoffel_symbols(g(x, p), jac(g)(x, p))

    def riemann(x, p):
        gam = christoffel(x, p)
        dgam = jac(christoffel)(x, p)  # dgam[r, a, b, m] = d_m Gamma^r_ab
        t1 = jnp.einsum("rnsm->rsmn", dgam)
        t2 = jnp.einsum("rmsn->rsmn", dgam)
        t3 = jnp.einsum("rml,lns->rsmn", gam, gam)
        t4 = jnp.einsum("rnl,lms->rsmn", gam, gam)
        return t1 - t2 + t3 - t4

    fns = dict(christoffel=christoffel, riemann=riemann)
    return {k: (jax.jit(v) if traceable else v) for k, v in fns.items()}


def coordinate_riemann_oracle(metric: MetricField, mode: str = "ad", fd_step: float = DEFAULT_FD_STEP):
    return CoordinateCurvature(metric, mode, fd_step)


# ---------------------------------------------------------------------------
# Weyl and Bel-Robinson


class WeylField:
    def __init__(self, curv: CurvatureField):
        if curv.chart.dim != 4:
            raise GeometryError(f"the Weyl tensor is only provided in four dimensions, chart has {curv.chart.dim}")
        self.curv = curv
        self.chart = curv.chart

    def frame(self, x) -> np.ndarray:
        """``W_{abcd}``, all indices lowered, orthonormal frame."""
        return self.curv.theta.evaluate("weyl_low", x)

    def coordinate(self, x) -> np.ndarray:
        e = self.curv.coframe.matrix(x)
        return np.einsum("abcd,am,bn,cr,ds->mnrs", self.frame(x), e, e, e, e)

    def trace(self, x) -> np.ndarray:
        """``g^{ac} W_{abcd}``."""
        return np.einsum("ac,abcd->bd", self.chart.eta, self.frame(x))


def weyl_tensor(curv: CurvatureField) -> WeylField:
    return WeylField(curv)


class BelRobinson:
    def __init__(self, weyl: WeylField):
        self.weyl = weyl
        self.curv = weyl.curv
        self.chart = weyl.chart

    def frame(self, x) -> np.ndarray:
        return self.curv.theta.evaluate("bel_robinson", x)

    def coordinate(self, x) -> np.ndarray:
        e = self.curv.coframe.matrix(x)
        return np.einsum("abcd,am,bn,cr,ds->mnrs", self.frame(x), e, e, e, e)

    def contract(self, x, X, Y, Z, W) -> float:
        """``Q(X, Y, Z, W)`` for coordinate-component vectors."""
        return float(np.einsum("mnrs,m,n,r,s->", self.coordinate(x), X, Y, Z, W))

    def symmetry_defect(self, x) -> float:
        q = self.frame(x)
        return max(float(np.max(np.abs(q - np.transpose(q, perm))))
                   for perm in itertools.permutations(range(4)))

    def divergence(self, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        return divergence_bel_robinson(self, x, step)


def bel_robinson(weyl: WeylField) -> BelRobinson:
    return BelRobinson(weyl)


def divergence_bel_robinson(Q: BelRobinson, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """``eta^{de} (nabla_e Q)_{abcd}`` by differencing the analytic tensor."""
    curv = Q.curv
    curv._require_analytic("Bel-Robinson divergence")
    x = curv.chart.require(x)
    h = curv.chart.fit_step(x, step, 1)
    fn = curv.theta.pipeline(x).frame_nabla("bel_robinson", 4)
    d = _as_np(fn(jnp.asarray(x), curv.coframe.params, h))
    return np.einsum("de,abcde->abc", curv.chart.eta, d)


# ---------------------------------------------------------------------------
# Yang-Mills view and the curvature wave equation


class GravitationalF:
    """Curvature as a Lorentz-algebra valued two-form with potential ``theta``."""

    def __init__(self, curv: CurvatureField):
        self.curv = curv
        self.chart = curv.chart

    def F(self, x) -> np.ndarray:
        return self.curv.mixed(x)

    def A(self, x) -> np.ndarray:
        return self.curv.theta(x)

    def structure_defect(self, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
        """``F - (dA + A ^ A)`` with ``dA`` re-derived by differencing ``A``."""
        x = self.chart.require(x)
        pipe = self.curv.theta.pipeline(x)
        h = self.chart.fit_step(x, step, 2)

        def build():
            theta = pipe.raw["theta"]

            def defect(x, p, h):
                th = theta(x, p)
                d = jacobian(theta, "fd", h, batched=pipe.traceable)(x, p)
                sq = jnp.einsum("acm,cbn->abmn", th, th)
                return pipe.raw["F"](x, p) - (jnp.swapaxes(d, 2, 3) - d + sq - jnp.swapaxes(sq, 2, 3))

            return defect

        fn = pipe.derived("F-defect", build)
        return _as_np(fn(jnp.asarray(x), self.curv.coframe.params, h))


def gravitational_F(curv: CurvatureField) -> GravitationalF:
    return GravitationalF(curv)


def quadratic_source(r_low, eta):
    """Frame-index quadratic curvature source of the vacuum curvature wave equation.

    Returns ``(RF, S)`` with ``RF_{abcd} = R_{cd}^{pe} R_{abpe}`` and
    ``S_{abcd} = R^p_a^e_c R_{pbde} + R^p_b^e_c R_{apde} + R^p_a^e_d R_{pbec} + R^p_b^e_d R_{apec}``.
    """
    r_mix = jnp.einsum("pq,ek,qakc->paec", eta, eta, r_low)  # R^p_a^e_c
    rf = jnp.einsum("cdpe,pk,el,abkl->abcd", r_low, eta, eta, r_low)
    s = (jnp.einsum("paec,pbde->abcd", r_mix, r_low) + jnp.einsum("pbec,apde->abcd", r_mix, r_low)
         + jnp.einsum("paed,pbec->abcd", r_mix, r_low) + jnp.einsum("pbed,apec->abcd", r_mix, r_low))
    return rf, s


def _penrose_builder(pipe: _Pipeline):
    raw = pipe.raw
    eta = pipe.eta
    F, theta, metric = raw["F"], raw["theta"], raw["metric"]
    dmetric = jax.jacfwd(metric)

    def christoffel(x, p):
        return christoffel_symbols(metric(x, p), dmetric(x, p))

    def grad_F(x, p, h):
        # coordinate-covariant derivative on the two-form legs: [i, j, m, n, a]
        G, f = christoffel(x, p), F(x, p)
        dF = jacobian(F, "fd", h, batched=pipe.traceable)
        return (dF(x, p) - jnp.einsum("lam,ijln->ijmna", G, f) - jnp.einsum("lan,ijml->ijmna", G, f))

    def P(x, p, h=None):
        th, f = theta(x, p), F(x, p)
        return jnp.einsum("ika,kjmn->ijmna", th, f) - jnp.einsum("kja,ikmn->ijmna", th, f)

    def coord_div(X):
        def div(x, p, h):
            # g^{ab} nabla_b X_a with nabla acting on (m, n, a)
            Xh = lambda y, q: X(y, q, h)  # noqa: E731
            G, d, t = christoffel(x, p), jacobian(Xh, "fd", h, batched=pipe.traceable)(x, p), Xh(x, p)
            nab = (d - jnp.einsum("lbm,ijlna->ijmnab", G, t) - jnp.einsum("lbn,ijmla->ijmnab", G, t)
                   - jnp.einsum("lba,ijmnl->ijmnab", G, t))
            return jnp.einsum("ab,ijmnab->ijmn", jnp.linalg.inv(metric(x, p)), nab)

        return div

    box_F = coord_div(grad_F)
    div_P = coord_div(P)

    def terms(x, p, h):
        ginv = jnp.linalg.inv(metric(x, p))
        th = theta(x, p)
        full = grad_F(x, p, h) + P(x, p)
        gauge = (jnp.einsum("ikb,kjmna->ijmnab", th, full) - jnp.einsum("kjb,ikmna->ijmnab", th, full))
        theta_block = jnp.einsum("ab,ijmnab->ijmn", ginv, gauge)
        e = raw["E"](x, p)
        r_low = raw["riem_low"](x, p)
        rf, s = quadratic_source(r_low, eta)
        # frame pair (a, b) raised on the first slot, two-form legs to coordinates
        to_mixed = lambda t: jnp.einsum("ik,kjcd,cm,dn->ijmn", eta, t, e, e)  # noqa: E731
        box = box_F(x, p, h)
        curv_term = to_mixed(rf)
        n_grad = -div_P(x, p, h) - theta_block
        n_quad = to_mixed(s)
        return dict(box=box, curvature=curv_term, gradient_source=n_grad, quadratic_source=n_quad,
                    residual=box + curv_term - n_grad - n_quad)

    return terms


def penrose_terms(curv: CurvatureField, x, step: float = DEFAULT_FD_STEP) -> dict:
    """All blocks of the curvature wave equation at ``x`` (frame pair, coordinate legs)."""
    curv._require_analytic("the curvature wave equation")
    x = curv.chart.require(x)
    curv.coframe.matrix(x)
    h = curv.chart.fit_step(x, step, 2)
    pipe = curv.theta.pipeline(x)
    fn = pipe.derived("penrose", lambda: _penrose_builder(pipe))
    return {k: _as_np(v) for k, v in fn(jnp.asarray(x), curv.coframe.params, h).items()}


def penrose_wave_residual(curv: CurvatureField, x, step: float = DEFAULT_FD_STEP) -> np.ndarray:
    """``box F + Riem * F - N(theta, Riem)`` with ``F`` the mixed curvature two-form.

    The outer derivatives are fourth-order central differences of the
    analytic curvature, so on exact vacuum solutions the residual is
    ``O(step^4)`` until rounding takes over.
    """
    return penrose_terms(curv, x, step)["residual"]
