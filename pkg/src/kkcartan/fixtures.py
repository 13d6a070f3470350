"""Named metrics used as golden fixtures and as CLI inputs.

Every fixture is a :class:`~kkcartan.frame_algebra.CoFrame` whose matrix
function is a module-level ``fn(x, params)``, so a compiled curvature pipeline
is reused across parameter values (all Kasner exponents share one compile).
"""

from __future__ import annotations

import re

import jax.numpy as jnp
import numpy as np

from .errors import GeometryError
from .expressions import Expression, ExpressionError
from .frame_algebra import Chart, CoFrame, MetricField, coframe_from_metric

SPACE_BOX = (-10.0, 10.0)


# -- matrix functions -----------------------------------------------------


def _minkowski_matrix(x, params):
    return jnp.eye(x.shape[0]) + 0.0 * x[0]


def _kasner_matrix(x, p):
    t = x[0]
    return jnp.diag(jnp.stack([1.0 + 0.0 * t, t ** p[0], t ** p[1], t ** p[2]]))


def schwarzschild_alpha(r, m):
    """``alpha = -beta = log(1 - 2m/r) / 2``."""
    return 0.5 * jnp.log(1.0 - 2.0 * m / r)


def _schwarzschild_matrix(x, m):
    r, th = x[1], x[2]
    a = schwarzschild_alpha(r, m)
    return jnp.diag(jnp.stack([jnp.exp(a), jnp.exp(-a), r, r * jnp.sin(th)]))


def _sphere_matrix(x, a):
    return jnp.diag(jnp.stack([a + 0.0 * x[0], a * jnp.sin(x[0])]))


def _conformal_matrix(x, p):
    # scale factor a(t) = c0 + c1 t + c2 t^2 in conformal time
    t = x[0]
    a = p[0] + p[1] * t + p[2] * t * t
    return a * jnp.eye(4)


def _perturbed_metric(x, p):
    amp, k, phase, center = p["amp"], p["k"], p["phase"], p["center"]
    bump = jnp.exp(-jnp.sum((x - center) ** 2) / 8.0)
    waves = jnp.sin(k @ x + phase)  # one wave per mode
    h = jnp.einsum("s,smn->mn", waves, amp) * bump
    return jnp.diag(jnp.array([-1.0, 1.0, 1.0, 1.0])) + h


# -- constructors ---------------------------------------------------------


def minkowski(dim: int = 4) -> CoFrame:
    names = ("t", "x", "y", "z")[:dim]
    chart = Chart(names, (-1,) + (1,) * (dim - 1), (SPACE_BOX,) * dim)
    return CoFrame(chart, _minkowski_matrix, (), name=f"minkowski{dim}")


def kasner(p1: float, p2: float, p3: float, t_box=(0.05, 50.0), check: bool = True) -> CoFrame:
    """``-dt^2 + sum t^{2 p_i} (dx^i)^2``; vacuum iff ``sum p = sum p^2 = 1``."""
    p = np.array([p1, p2, p3], dtype=float)
    if check and (abs(p.sum() - 1.0) > 1e-12 or abs((p * p).sum() - 1.0) > 1e-12):
        raise GeometryError(f"Kasner exponents {p.tolist()} violate sum p = sum p^2 = 1")
    chart = Chart(("t", "x1", "x2", "x3"), (-1, 1, 1, 1), (t_box, SPACE_BOX, SPACE_BOX, SPACE_BOX))
    return CoFrame(chart, _kasner_matrix, jnp.asarray(p), name=f"kasner({p1:g},{p2:g},{p3:g})")


def schwarzschild(m: float = 1.0, r_max: float | None = None) -> CoFrame:
    """Static exterior region ``r in [2.05 m, r_max]`` with the polar axis cut out."""
    if m <= 0:
        raise GeometryError("Schwarzschild mass must be positive")
    r_max = 100.0 * m if r_max is None else r_max
    chart = Chart(("t", "r", "theta", "phi"), (-1, 1, 1, 1),
                  (SPACE_BOX, (2.05 * m, r_max), (0.01, np.pi - 0.01), (-np.pi, np.pi)))
    return CoFrame(chart, _schwarzschild_matrix, jnp.asarray(float(m)), name=f"schwarzschild({m:g})")


def equivariant(omega: str, gamma: str, parameters=None, r_box=(0.1, 10.0)) -> CoFrame:
    """2+1 metric with coframe ``e^Omega dt, e^gamma dr, r dtheta``.

    ``omega`` and ``gamma`` are expressions in ``t`` and ``r``.
    """
    chart = Chart(("t", "r", "theta"), (-1, 1, 1), (SPACE_BOX, r_box, (-np.pi, np.pi)))
    ex_o = Expression(omega, chart.coord_names, parameters)
    ex_g = Expression(gamma, chart.coord_names, parameters)
    for ex in (ex_o, ex_g):
        if "theta" in ex.names:
            raise ExpressionError(ex.text, "equivariant potentials may depend on t and r only")

    def matrix(x, params):
        return jnp.diag(jnp.stack([jnp.exp(ex_o.at_point(x) + 0.0 * x[0]),
                                   jnp.exp(ex_g.at_point(x) + 0.0 * x[0]), x[1]]))

    frame = CoFrame(chart, matrix, (), name=f"equivariant({omega},{gamma})")
    frame.potentials = (ex_o, ex_g)
    return frame


def round_sphere(a: float = 1.0) -> CoFrame:
    chart = Chart(("theta", "phi"), (1, 1), ((0.01, np.pi - 0.01), (-np.pi, np.pi)))
    return CoFrame(chart, _sphere_matrix, jnp.asarray(float(a)), name=f"sphere({a:g})")


def conformally_flat(c0: float = 1.0, c1: float = 0.5, c2: float = 0.25) -> CoFrame:
    """``a(t)^2 (-dt^2 + dx^2)`` with quadratic ``a``; Weyl-flat, not Ricci-flat."""
    chart = Chart(("t", "x", "y", "z"), (-1, 1, 1, 1), ((0.0, 5.0), SPACE_BOX, SPACE_BOX, SPACE_BOX))
    return CoFrame(chart, _conformal_matrix, jnp.asarray([c0, c1, c2], dtype=float), name="conformally_flat")


def perturbed_flat_params(seed: int, amplitude: float = 1e-2, modes: int = 2) -> dict:
    """Random smooth perturbation data; every entry of ``h`` stays below ``amplitude``."""
    rng = np.random.default_rng(seed)
    amp = rng.uniform(-1.0, 1.0, size=(modes, 4, 4))
    amp = 0.5 * (amp + np.swapaxes(amp, 1, 2)) * amplitude / modes
    return {
        "amp": jnp.asarray(amp),
        "k": jnp.asarray(rng.uniform(-1.5, 1.5, size=(modes, 4))),
        "phase": jnp.asarray(rng.uniform(0.0, 2 * np.pi, size=modes)),
        "center": jnp.asarray(rng.uniform(-0.5, 0.5, size=4)),
    }


def perturbed_flat_metric(seed: int, amplitude: float = 1e-2) -> MetricField:
    chart = Chart(("t", "x", "y", "z"), (-1, 1, 1, 1), ((-2.0, 2.0),) * 4)
    return MetricField(chart, _perturbed_metric, perturbed_flat_params(seed, amplitude))


def perturbed_flat(seed: int, amplitude: float = 1e-2) -> CoFrame:
    """Orthonormal coframe of ``eta + h`` with a random bump-localized ``h``."""
    return coframe_from_metric(perturbed_flat_metric(seed, amplitude), name=f"perturbed({seed})")


# -- names ----------------------------------------------------------------

_NAME = re.compile(r"^\s*([a-z_]+\d*)\s*(?:\((.*)\)|:(.*))?\s*$", re.S)


def _split_args(text: str) -> list[str]:
    args, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            args.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        args.append(cur.strip())
    return args


def _number(text: str) -> float:
    return float(Expression(text, ())({}))


def fixture_by_name(name: str) -> CoFrame:
    """Resolve ``minkowski4``, ``kasner(2/3,2/3,-1/3)``, ``schwarzschild(1)``,
    ``equivariant(Omega, gamma)``, ``sphere(a)``, ``conformal``, ``perturbed(seed)``.
    ``name:args`` is accepted as a synonym for ``name(args)``."""
    m = _NAME.match(name)
    if not m:
        raise GeometryError(f"cannot parse fixture name {name!r}")
    head = m.group(1)
    raw = m.group(2) if m.group(2) is not None else m.group(3)
    args = _split_args(raw) if raw else []
    if head.startswith("minkowski"):
        dim = int(head[len("minkowski"):] or (args[0] if args else 4))
        return minkowski(dim)
    if head == "kasner":
        if len(args) != 3:
            raise GeometryError("kasner needs three exponents")
        return kasner(*[_number(a) for a in args])
    if head == "schwarzschild":
        return schwarzschild(_number(args[0]) if args else 1.0)
    if head == "equivariant":
        if len(args) != 2:
            raise GeometryError("equivariant needs two expressions: Omega(t,r), gamma(t,r)")
        return equivariant(args[0], args[1])
    if head == "sphere":
        return round_sphere(_number(args[0]) if args else 1.0)
    if head in ("conformal", "conformally_flat"):
        return conformally_flat(*[_number(a) for a in args])
    if head == "perturbed":
        return perturbed_flat(int(_number(args[0])) if args else 0,
                              _number(args[1]) if len(args) > 1 else 1e-2)
    raise GeometryError(f"unknown fixture {head!r}")
