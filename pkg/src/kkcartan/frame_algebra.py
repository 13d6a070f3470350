"""Exterior algebra over a single coordinate chart.

Forms are stored in the coordinate basis on strictly increasing multi-indices;
frame components are produced on demand from a coframe and its dual.  Scalar
fields come in two flavours:

* *traceable* fields are written with ``jax.numpy`` and differentiate exactly
  (to any order) by automatic differentiation;
* plain callables fall back to fourth-order central finite differences.

The orientation is fixed once for all: ``eps_{0 1 ... n-1} = +sqrt|det g|`` with
the coordinate order of the chart.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .derivatives import FD_REACH, scalar_gradient_fd
from .errors import DomainError, GeometryError
from .expressions import Expression

DET_TOL = 1e-12


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Coordinates, signature and the closed box on which fields may be sampled."""

    coord_names: tuple
    signature: tuple
    domain_box: tuple

    def __post_init__(self):
        object.__setattr__(self, "coord_names", tuple(self.coord_names))
        object.__setattr__(self, "signature", tuple(int(s) for s in self.signature))
        object.__setattr__(self, "domain_box", tuple((float(a), float(b)) for a, b in self.domain_box))
        n = len(self.coord_names)
        if n not in (2, 3, 4):
            raise GeometryError(f"chart dimension must be 2, 3 or 4, got {n}")
        if len(self.signature) != n or len(self.domain_box) != n:
            raise GeometryError("coord_names, signature and domain_box must have equal length")
        if any(s not in (-1, 1) for s in self.signature):
            raise GeometryError(f"signature entries must be +-1, got {self.signature}")
        negatives = [i for i, s in enumerate(self.signature) if s < 0]
        if negatives and negatives != [0]:
            raise GeometryError("a Lorentzian chart has exactly one -1, in the first slot")
        if any(not a < b for a, b in self.domain_box):
            raise GeometryError(f"empty domain box {self.domain_box}")

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    @property
    def lorentzian(self) -> bool:
        return self.signature[0] < 0

    @property
    def eta(self) -> np.ndarray:
        return np.diag(np.asarray(self.signature, dtype=float))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(all(a <= xi <= b for xi, (a, b) in zip(x, self.domain_box)))

    def margin(self, x) -> float:
        """Distance from ``x`` to the nearest face of the box (negative outside)."""
        x = np.asarray(x, dtype=float)
        return float(min(min(xi - a, b - xi) for xi, (a, b) in zip(x, self.domain_box)))

    def require(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"expected a point with {self.dim} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)) or not self.contains(x):
            raise DomainError(f"point {x.tolist()} lies outside the domain box {self.domain_box}")
        return x

    def fit_step(self, x, step: float, levels: int = 1) -> float:
        """Finite-difference step whose ``levels`` nested stencils stay inside the box.

        Near a face the step is shrunk, which is the Richardson combination of
        central differences at the largest admissible spacing.  A point on the
        boundary itself has no admissible stencil.
        """
        x = self.require(x)
        room = self.margin(x)
        need = FD_REACH * step * levels
        if room >= need:
            return step
        if room <= 0.0:
            raise DomainError(f"point {x.tolist()} sits on the domain boundary; no central stencil fits")
        return room / (FD_REACH * levels)


# ---------------------------------------------------------------------------
# scalar fields


class ScalarField:
    """A smooth function on a chart together with a way to differentiate it.

    Parameters
    ----------
    func
        ``func(x) -> scalar`` on a coordinate vector.
    partials
        optional analytic gradient ``partials(x) -> (dim,)``.
    fd_step
        step for the finite-difference gradient when no analytic route exists.
    traceable
        ``func`` is written with ``jax.numpy`` and may be differentiated by AD.
    """

    def __init__(self, func: Callable, partials: Callable | None = None, fd_step: float = 1e-5,
                 *, traceable: bool = False, chart: Chart | None = None):
        if fd_step <= 0:
            raise ValueError("fd_step must be positive")
        self.func = func
        self.partials = partials
        self.fd_step = float(fd_step)
        self.traceable = bool(traceable)
        self.chart = chart

    @property
    def analytic(self) -> bool:
        return self.partials is not None or self.traceable

    def grad_func(self) -> Callable:
        """Gradient as a function of the point (traceable when the field is)."""
        if self.partials is not None:
            return self.partials
        if self.traceable:
            return jax.grad(self.func)

        def fd(x):
            step = self.fd_step if self.chart is None else self.chart.fit_step(np.asarray(x), self.fd_step)
            return scalar_gradient_fd(self.func, x, step)

        return fd

    def __call__(self, x) -> float:
        if self.chart is not None:
            x = self.chart.require(x)
        return float(self.func(jnp.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        if self.chart is not None:
            x = self.chart.require(x)
        return np.asarray(self.grad_func()(jnp.asarray(x, dtype=float)), dtype=float)

    def fd_gradient(self, x, step: float | None = None) -> np.ndarray:
        """Finite-difference gradient regardless of any analytic route."""
        step = self.fd_step if step is None else step
        return np.asarray(scalar_gradient_fd(self.func, x, step), dtype=float)

    # -- construction helpers -------------------------------------------

    @classmethod
    def from_expression(cls, text: str, chart: Chart, parameters: Mapping | None = None) -> "ScalarField":
        expr = Expression(text, chart.coord_names, parameters)
        field = cls(expr.at_point, traceable=True, chart=chart)
        field.expression = expr
        return field

    @classmethod
    def constant(cls, value: float, chart: Chart | None = None) -> "ScalarField":
        value = float(value)
        return cls(lambda x: value + 0.0 * x[0], traceable=True, chart=chart)

    @classmethod
    def coordinate(cls, index: int, chart: Chart | None = None) -> "ScalarField":
        return cls(lambda x: x[index], traceable=True, chart=chart)

    # -- arithmetic (keeps the analytic route when both operands have one) --

    def _combine(self, other, value, grad):
        if not isinstance(other, ScalarField):
            other = ScalarField.constant(other, self.chart)
        f, g = self.func, other.func
        traceable = self.traceable and other.traceable
        partials = None
        if not traceable and self.analytic and other.analytic:
            df, dg = self.grad_func(), other.grad_func()
            partials = lambda x: grad(f(x), g(x), df(x), dg(x))  # noqa: E731
        return ScalarField(lambda x: value(f(x), g(x)), partials, min(self.fd_step, other.fd_step),
                           traceable=traceable, chart=self.chart or other.chart)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, lambda a, b, da, db: da + db)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, lambda a, b, da, db: da - db)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, lambda a, b, da, db: da * b + a * db)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


ZERO = ScalarField.constant(0.0)


# ---------------------------------------------------------------------------
# differential forms


def _permutation_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] == seq[j]:
                return 0
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def increasing_indices(dim: int, degree: int):
    return list(itertools.combinations(range(dim), degree))


class FormField:
    """A k-form stored on strictly increasing coordinate multi-indices.

    Missing components are zero.  ``checks`` are callables run on every eager
    evaluation (used to reject degenerate metrics or singular frames).
    """

    def __init__(self, chart: Chart, degree: int, components: Mapping[tuple, ScalarField],
                 checks: Sequence[Callable] = ()):
        if not 0 <= degree <= chart.dim:
            raise GeometryError(f"degree {degree} out of range for a {chart.dim}-chart")
        comps = {}
        for idx, field in components.items():
            idx = tuple(int(i) for i in idx)
            if len(idx) != degree or any(i < 0 or i >= chart.dim for i in idx):
                raise GeometryError(f"index {idx} does not fit a {degree}-form on a {chart.dim}-chart")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise GeometryError(f"component index {idx} must be strictly increasing")
            if not isinstance(field, ScalarField):
                field = ScalarField.constant(field, chart)
            comps[idx] = field
        self.chart = chart
        self.degree = degree
        self.components = comps
        self.checks = tuple(checks)

    @property
    def traceable(self) -> bool:
        return all(f.traceable for f in self.components.values())

    @property
    def analytic(self) -> bool:
        return all(f.analytic for f in self.components.values())

    def component(self, index) -> tuple[int, ScalarField | None]:
        """Sign and stored field for an arbitrary (unsorted) multi-index."""
        sign = _permutation_sign(index)
        if sign == 0:
            return 0, None
        return sign, self.components.get(tuple(sorted(index)))

    def array_func(self) -> Callable:
        """``x -> full antisymmetric component array`` built from the stored fields."""
        dim, k = self.chart.dim, self.degree
        entries = []
        for perm in itertools.permutations(range(dim), k) if k else [()]:
            sign, field = self.component(perm)
            if field is not None:
                entries.append((perm, sign, field.func))

        def full(x):
            out = jnp.zeros((dim,) * k, dtype=float)
            for perm, sign, f in entries:
                out = out.at[perm].set(sign * f(x))
            return out

        return full

    def __call__(self, x) -> np.ndarray:
        x = self.chart.require(x)
        for check in self.checks:
            check(x)
        return np.asarray(self.array_func()(jnp.asarray(x)), dtype=float)

    def coefficient(self, index, x) -> float:
        sign, field = self.component(index)
        if field is None:
            x = self.chart.require(x)
            return 0.0
        return sign * field(x)

    def __add__(self, other: "FormField") -> "FormField":
        _same_chart(self, other)
        if self.degree != other.degree:
            raise GeometryError("cannot add forms of different degree")
        comps = dict(self.components)
        for idx, f in other.components.items():
            comps[idx] = comps[idx] + f if idx in comps else f
        return FormField(self.chart, self.degree, comps, self.checks + other.checks)

    def scaled(self, factor) -> "FormField":
        """Multiply by a scalar field or a number."""
        return FormField(self.chart, self.degree,
                         {idx: f * factor for idx, f in self.components.items()}, self.checks)


def _same_chart(a: FormField, b: FormField):
    if a.chart != b.chart:
        raise GeometryError("forms live on different charts")


def one_form(chart: Chart, components: Sequence) -> FormField:
    """Build a one-form from ``dim`` scalar fields, numbers or expression strings."""
    if len(components) != chart.dim:
        raise GeometryError(f"need {chart.dim} components, got {len(components)}")
    comps = {}
    for mu, c in enumerate(components):
        if isinstance(c, str):
            c = ScalarField.from_expression(c, chart)
        elif not isinstance(c, ScalarField):
            if float(c) == 0.0:
                continue
            c = ScalarField.constant(c, chart)
        comps[(mu,)] = c
    return FormField(chart, 1, comps)


def coordinate_differential(chart: Chart, index: int) -> FormField:
    return FormField(chart, 1, {(index,): ScalarField.constant(1.0, chart)})


def scalar_form(field: ScalarField, chart: Chart) -> FormField:
    return FormField(chart, 0, {(): field})


def wedge(a: FormField, b: FormField) -> FormField:
    """Exterior product with shuffle signs; graded commutative and associative."""
    _same_chart(a, b)
    k, l, dim = a.degree, b.degree, a.chart.dim
    if k + l > dim:
        raise GeometryError(f"wedge of degrees {k}+{l} overflows a {dim}-chart")
    comps = {}
    for out in increasing_indices(dim, k + l):
        terms = []
        for left in itertools.combinations(out, k):
            right = tuple(i for i in out if i not in left)
            fa, fb = a.components.get(left), b.components.get(right)
            if fa is None or fb is None:
                continue
            terms.append(_permutation_sign(left + right) * (fa * fb))
        if terms:
            total = terms[0]
            for t in terms[1:]:
                total = total + t
            comps[out] = total
    return FormField(a.chart, k + l, comps, a.checks + b.checks)


def _partial_field(field: ScalarField, mu: int) -> ScalarField:
    grad = field.grad_func()
    chart = field.chart
    if field.traceable:
        return ScalarField(lambda x: grad(x)[mu], traceable=True, chart=chart)
    return ScalarField(lambda x: grad(x)[mu], fd_step=field.fd_step, chart=chart)


def exterior_derivative(a: FormField) -> FormField:
    """``(da)_{m0..mk} = sum_i (-1)^i d_{mi} a_{m0..^mi..mk}`` on increasing indices."""
    dim, k = a.chart.dim, a.degree
    if k >= dim:
        raise GeometryError(f"d of a top-degree form on a {dim}-chart is identically zero")
    partials = {}
    for idx, field in a.components.items():
        partials[idx] = [_partial_field(field, mu) for mu in range(dim)]
    comps = {}
    for out in increasing_indices(dim, k + 1):
        terms = []
        for i, mu in enumerate(out):
            rest = out[:i] + out[i + 1:]
            if rest in partials:
                terms.append(partials[rest][mu] * float((-1) ** i))
        if terms:
            total = terms[0]
            for t in terms[1:]:
                total = total + t
            comps[out] = total
    return FormField(a.chart, k + 1, comps, a.checks)


# ---------------------------------------------------------------------------
# metrics and coframes


class MetricField:
    """Symmetric tensor ``g_{mu nu}(x)`` given as a point function ``fn(x, params)``."""

    def __init__(self, chart: Chart, fn: Callable, params=(), *, traceable: bool = True, fd_step: float = 1e-3):
        self.chart = chart
        self.fn = fn
        self.params = params
        self.traceable = traceable
        self.fd_step = fd_step

    def __call__(self, x) -> np.ndarray:
        x = self.chart.require(x)
        g = np.asarray(self.fn(jnp.asarray(x), self.params), dtype=float)
        if abs(np.linalg.det(g)) <= DET_TOL:
            raise GeometryError(f"metric is degenerate at {x.tolist()}")
        return g

    @classmethod
    def from_expressions(cls, chart: Chart, entries, parameters=None) -> "MetricField":
        """Metric from a nested list of expression strings (symmetrized: upper triangle wins)."""
        n = chart.dim
        exprs = [[Expression(str(entries[min(i, j)][max(i, j)]), chart.coord_names, parameters)
                  for j in range(n)] for i in range(n)]

        def fn(x, params):
            return jnp.stack([jnp.stack([exprs[i][j].at_point(x) + 0.0 * x[0] for j in range(n)])
                              for i in range(n)])

        return cls(chart, fn)


class CoFrame:
    """Orthonormal coframe ``e^a_mu(x)``; row ``a`` is the one-form ``e^a``.

    The canonical representation is a point function ``matrix_fn(x, params)``
    so that a jit-compiled pipeline can be shared by every member of a
    parametrized family.  ``forms`` exposes the same data as one-form fields.
    """

    def __init__(self, chart: Chart, matrix_fn: Callable, params=(), *, traceable: bool = True,
                 fd_step: float = 1e-3, name: str = "coframe"):
        self.chart = chart
        self.matrix_fn = matrix_fn
        self.params = params
        self.traceable = traceable
        self.fd_step = fd_step
        self.name = name

    @classmethod
    def from_forms(cls, chart: Chart, forms: Sequence[FormField], name: str = "coframe") -> "CoFrame":
        if len(forms) != chart.dim or any(f.degree != 1 or f.chart != chart for f in forms):
            raise GeometryError(f"a coframe on this chart needs {chart.dim} one-forms on the same chart")
        n = chart.dim
        funcs = [[(f.components[(m,)].func if (m,) in f.components else None) for m in range(n)] for f in forms]

        def matrix_fn(x, params):
            rows = []
            for a in range(n):
                rows.append(jnp.stack([funcs[a][m](x) + 0.0 * x[0] if funcs[a][m] else 0.0 * x[0]
                                       for m in range(n)]))
            return jnp.stack(rows)

        traceable = all(f.traceable for f in forms)
        step = min((c.fd_step for f in forms for c in f.components.values()), default=1e-3)
        frame = cls(chart, matrix_fn, (), traceable=traceable, fd_step=max(step, 1e-3), name=name)
        frame._forms = list(forms)
        return frame

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def frame_metric(self) -> np.ndarray:
        return self.chart.eta

    @property
    def forms(self) -> list[FormField]:
        if getattr(self, "_forms", None) is None:
            n = self.dim
            self._forms = [
                FormField(self.chart, 1, {(m,): ScalarField(
                    (lambda x, a=a, m=m: self.matrix_fn(x, self.params)[a, m]),
                    traceable=self.traceable, fd_step=self.fd_step, chart=self.chart) for m in range(n)})
                for a in range(n)
            ]
        return self._forms

    def matrix(self, x) -> np.ndarray:
        x = self.chart.require(x)
        e = np.asarray(self.matrix_fn(jnp.asarray(x), self.params), dtype=float)
        det = np.linalg.det(e)
        if not np.isfinite(det) or abs(det) <= DET_TOL:
            raise GeometryError(f"coframe matrix is singular at {x.tolist()} (det={det:.3e})")
        return e

    @property
    def metric_fn(self) -> Callable:
        """``(x, params) -> eta_ab e^a_mu e^b_nu``; shared by every frame with the same matrix function."""
        return _metric_fn_for(self.matrix_fn, self.chart.signature)

    def metric(self) -> MetricField:
        return MetricField(self.chart, self.metric_fn, self.params, traceable=self.traceable, fd_step=self.fd_step)


@functools.lru_cache(maxsize=None)
def _metric_fn_for(matrix_fn, signature):
    eta = np.diag(np.asarray(signature, dtype=float))

    def metric_fn(x, params):
        e = matrix_fn(x, params)
        return e.T @ eta @ e

    return metric_fn


class FrameVectors:
    """Frame vector fields ``e_a^mu`` dual to a coframe; column ``a`` is ``e_a``."""

    def __init__(self, coframe: CoFrame):
        self.coframe = coframe

    def __call__(self, x) -> np.ndarray:
        return np.linalg.inv(self.coframe.matrix(x))

    def fn(self, x, params):
        return jnp.linalg.inv(self.coframe.matrix_fn(x, params))


def frame_dual(coframe: CoFrame) -> FrameVectors:
    """Pointwise inverse of ``e^a_mu``; ``e^a_mu e_b^mu = delta^a_b``."""
    return FrameVectors(coframe)


# ---------------------------------------------------------------------------
# Hodge duality


def _metric_fn_of(metric) -> tuple[Callable, bool]:
    if isinstance(metric, MetricField):
        return (lambda x: metric.fn(x, metric.params)), metric.traceable
    if callable(metric):
        return metric, True
    g = jnp.asarray(metric, dtype=float)
    return (lambda x: g), True


def hodge_star(form: FormField, metric) -> FormField:
    """Metric Hodge dual with ``eps_{01..} = +sqrt|det g|``.

    ``(*a)_J = sum_{I increasing} a^I eps_{I J}`` with all indices of ``a``
    raised by ``g``.  ``metric`` may be a MetricField, a callable ``x -> g`` or
    a constant matrix.
    """
    chart, k = form.chart, form.degree
    n = chart.dim
    gfn, g_traceable = _metric_fn_of(metric)
    full = form.array_func()
    in_idx = increasing_indices(n, k)

    def raised(x):
        ginv = jnp.linalg.inv(gfn(x))
        arr = full(x)
        for axis in range(k):
            arr = jnp.moveaxis(jnp.tensordot(ginv, arr, axes=([1], [axis])), 0, axis)
        return arr

    comps = {}
    for out in increasing_indices(n, n - k):
        pairs = []
        for I in in_idx:
            s = _permutation_sign(I + out)
            if s:
                pairs.append((I, s))

        def comp(x, pairs=pairs):
            vol = jnp.sqrt(jnp.abs(jnp.linalg.det(gfn(x))))
            arr = raised(x)
            return vol * sum(s * arr[I] for I, s in pairs)

        traceable = form.traceable and g_traceable
        comps[out] = ScalarField(comp, traceable=traceable, chart=chart,
                                 fd_step=min((f.fd_step for f in form.components.values()), default=1e-5))

    def nondegenerate(x):
        det = float(np.linalg.det(np.asarray(gfn(jnp.asarray(x)))))
        if not np.isfinite(det) or abs(det) <= DET_TOL:
            raise GeometryError(f"metric is degenerate at {np.asarray(x).tolist()}")

    return FormField(chart, n - k, comps, form.checks + (nondegenerate,))


def hodge_dual_2d(form: FormField, metric) -> FormField:
    """Hodge dual on a 2+1 Lorentzian chart (the orbit space of the reduction)."""
    if form.chart.dim != 3 or not form.chart.lorentzian:
        raise GeometryError("hodge_dual_2d needs a Lorentzian 2+1 chart")
    return hodge_star(form, metric)


def hodge_sign(dim: int, degree: int, lorentzian: bool) -> int:
    """``** = (-1)^{k(n-k)} * sign(det g)`` on k-forms."""
    return (-1) ** (degree * (dim - degree)) * (-1 if lorentzian else 1)


def levi_civita_symbol(dim: int) -> np.ndarray:
    eps = np.zeros((dim,) * dim)
    for perm in itertools.permutations(range(dim)):
        eps[perm] = _permutation_sign(perm)
    return eps


__all__ = [
    "Chart", "ScalarField", "FormField", "MetricField", "CoFrame", "FrameVectors",
    "wedge", "exterior_derivative", "frame_dual", "hodge_star", "hodge_dual_2d", "hodge_sign",
    "one_form", "coordinate_differential", "scalar_form", "levi_civita_symbol", "increasing_indices",
]


# ---------------------------------------------------------------------------
# orthonormal coframes of a given metric


def ldl_coframe_matrix(g):
    """Coframe ``E`` with ``E^T diag(sign D) E = g`` from an unpivoted LDL^T split.

    Row ``a`` of ``E`` is ``sqrt|D_a| L[:, a]``.  For a Lorentzian metric with
    ``g_00 < 0`` and positive-definite spatial Schur complement the first leg is
    timelike and the rest spacelike.  Smooth in ``g`` (hence traceable), which
    is what lets curvature be differentiated through the factorization.
    """
    n = g.shape[0]
    L = [[None] * n for _ in range(n)]
    D = [None] * n
    for j in range(n):
        D[j] = g[j, j] - sum(L[j][k] ** 2 * D[k] for k in range(j))
        for i in range(j + 1, n):
            L[i][j] = (g[i, j] - sum(L[i][k] * L[j][k] * D[k] for k in range(j))) / D[j]
    rows = []
    for a in range(n):
        scale = jnp.sqrt(jnp.abs(D[a]))
        rows.append(jnp.stack([scale * (1.0 if m == a else (L[m][a] if m > a else 0.0 * g[0, 0]))
                               for m in range(n)]))
    return jnp.stack(rows), jnp.stack(D)


def coframe_from_metric(metric: MetricField, name: str = "ldl") -> CoFrame:
    """Orthonormal coframe of ``metric`` (first leg timelike on Lorentzian charts)."""
    fn = _ldl_matrix_fn(metric.fn)
    frame = CoFrame(metric.chart, fn, metric.params, traceable=metric.traceable,
                    fd_step=metric.fd_step, name=name)
    signature = np.asarray(metric.chart.signature)

    def check(x):
        _, d = ldl_coframe_matrix(jnp.asarray(metric(x)))
        if np.any(np.sign(np.asarray(d)) != signature):
            raise GeometryError(f"metric at {np.asarray(x).tolist()} does not have signature {signature.tolist()} "
                                "in the LDL ordering of the chart")

    frame.signature_check = check
    return frame


_LDL_CACHE: dict = {}


def _ldl_matrix_fn(metric_fn):
    # one wrapper per metric function keeps downstream jit caches keyed stably
    if metric_fn not in _LDL_CACHE:
        _LDL_CACHE[metric_fn] = lambda x, params: ldl_coframe_matrix(metric_fn(x, params))[0]
    return _LDL_CACHE[metric_fn]


__all__ += ["ldl_coframe_matrix", "coframe_from_metric"]
