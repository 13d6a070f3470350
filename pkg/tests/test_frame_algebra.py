import itertools

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kkcartan import fixtures as fx
from kkcartan.errors import DomainError, GeometryError
from kkcartan.frame_algebra import (
    Chart, CoFrame, FormField, MetricField, ScalarField, coordinate_differential, exterior_derivative,
    frame_dual, hodge_dual_2d, hodge_sign, hodge_star, one_form, wedge,
)

CHART3 = Chart(("t", "x", "y"), (-1, 1, 1), ((-2, 2),) * 3)
CHART4 = Chart(("t", "x", "y", "z"), (-1, 1, 1, 1), ((-2, 2),) * 4)
ETA3 = np.diag([-1.0, 1.0, 1.0])


def dx(i, chart=CHART4):
    return coordinate_differential(chart, i)


def test_wedge_of_a_form_with_itself_vanishes():
    w = wedge(dx(1), dx(1))
    assert np.all(w([0.1, 0.2, 0.3, 0.4]) == 0.0)


def test_wedge_is_antisymmetric_on_one_forms():
    p = [0.3, -0.2, 0.1, 0.5]
    np.testing.assert_array_equal(wedge(dx(1), dx(2))(p), -wedge(dx(2), dx(1))(p))


def test_wedge_coefficient_by_brute_force():
    a = one_form(CHART4, [2.0, 3.0, 0.0, 0.0])  # 2 dt + 3 dr
    b = dx(1)
    w = wedge(a, b)
    p = [0.1, 0.2, 0.3, 0.4]
    # brute force: (a^b)_{mn} = a_m b_n - a_n b_m
    av, bv = a(p), b(p)
    brute = np.outer(av, bv) - np.outer(bv, av)
    np.testing.assert_allclose(w(p), brute, atol=1e-15)
    assert w.coefficient((0, 1), p) == pytest.approx(2.0)


def test_wedge_rejects_overflow_and_mixed_charts():
    with pytest.raises(GeometryError):
        wedge(wedge(dx(0, CHART3), dx(1, CHART3)), wedge(dx(1, CHART3), dx(2, CHART3)))
    with pytest.raises(GeometryError):
        wedge(dx(0, CHART3), dx(0))


def test_d_of_coordinate_differential_is_zero():
    assert np.all(exterior_derivative(dx(0))([0.1, 0.2, 0.3, 0.4]) == 0.0)


def test_d_of_kasner_leg():
    chart = fx.kasner(2 / 3, 2 / 3, -1 / 3).chart
    p1 = 2 / 3
    leg = one_form(chart, [0.0, ScalarField(lambda x: x[0] ** p1, traceable=True, chart=chart), 0.0, 0.0])
    d = exterior_derivative(leg)
    value = d.coefficient((0, 1), [2.0, 0.0, 0.0, 0.0])
    assert value == pytest.approx((2 / 3) * 2 ** (-1 / 3), abs=1e-14)


def test_d_of_kasner_leg_finite_difference():
    chart = fx.kasner(2 / 3, 2 / 3, -1 / 3).chart
    leg = one_form(chart, [0.0, ScalarField(lambda x: float(x[0]) ** (2 / 3), chart=chart), 0.0, 0.0])
    value = exterior_derivative(leg).coefficient((0, 1), [2.0, 0.0, 0.0, 0.0])
    assert value == pytest.approx((2 / 3) * 2 ** (-1 / 3), abs=1e-10)


def test_dd_vanishes_with_finite_differences():
    # A = x y dt with plain-callable (FD) coefficients
    a = FormField(CHART3, 1, {(0,): ScalarField(lambda x: float(x[1]) * float(x[2]), fd_step=1e-3, chart=CHART3)})
    dd = exterior_derivative(exterior_derivative(a))
    assert np.max(np.abs(dd([0.3, 0.7, -0.4]))) <= 1e-6


def test_exterior_derivative_outside_domain_raises():
    leg = one_form(CHART3, ["t*x", 0.0, 0.0])
    with pytest.raises(DomainError):
        exterior_derivative(leg)([5.0, 0.0, 0.0])


def test_frame_dual_minkowski_and_kasner():
    np.testing.assert_array_equal(frame_dual(fx.minkowski())([0, 0, 0, 0]), np.eye(4))
    dual = frame_dual(fx.kasner(2 / 3, 2 / 3, -1 / 3))([2.0, 0, 0, 0])
    np.testing.assert_allclose(dual, np.diag([1, 2 ** (-2 / 3), 2 ** (-2 / 3), 2 ** (1 / 3)]), rtol=1e-14)


def test_singular_coframe_raises():
    frame = CoFrame(CHART3, lambda x, p: jnp.diag(jnp.stack([x[0], 1.0 + 0 * x[0], 1.0 + 0 * x[0]])))
    with pytest.raises(GeometryError):
        frame_dual(frame)([0.0, 0.0, 0.0])


@given(st.integers(0, 2**31 - 1))
def test_frame_dual_inverts_random_frames(seed):
    rng = np.random.default_rng(seed)
    m = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
    frame = CoFrame(CHART4, lambda x, p: jnp.asarray(m) + 0.0 * x[0])
    np.testing.assert_allclose(frame.matrix([0, 0, 0, 0]) @ frame_dual(frame)([0, 0, 0, 0]), np.eye(4), atol=1e-10)


def test_hodge_dual_of_dt_dx_in_2plus1():
    star = hodge_dual_2d(wedge(dx(0, CHART3), dx(1, CHART3)), ETA3)
    # raising t and x costs one sign, and eps_{txy} = +1
    np.testing.assert_allclose(star([0, 0, 0]), [0.0, 0.0, -1.0])


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_double_dual_on_one_forms_is_minus_identity(c):
    a = one_form(CHART3, c)
    twice = hodge_dual_2d(hodge_dual_2d(a, ETA3), ETA3)
    assert hodge_sign(3, 1, True) == -1
    np.testing.assert_allclose(twice([0, 0, 0]), -np.asarray(c), atol=1e-12)


def test_hodge_star_conformal_weight_on_one_forms():
    lam = ScalarField.from_expression("0.3*sin(t) + 0.2*x*y", CHART3)
    metric = MetricField(CHART3, lambda x, p: jnp.exp(2 * lam.func(x)) * jnp.asarray(ETA3))
    a = one_form(CHART3, ["1 + x", "t*y", "0.5"])
    p = [0.4, -0.3, 0.8]
    np.testing.assert_allclose(hodge_star(a, metric)(p), np.exp(lam(p)) * hodge_star(a, ETA3)(p), rtol=1e-13)


def test_hodge_star_rejects_degenerate_metric():
    a = one_form(CHART3, [1.0, 0.0, 0.0])
    with pytest.raises(GeometryError):
        hodge_star(a, np.diag([-1.0, 0.0, 1.0]))([0, 0, 0])
    with pytest.raises(GeometryError):
        hodge_dual_2d(one_form(CHART4, [1, 0, 0, 0]), np.diag([-1.0, 1, 1, 1]))


# -- properties ---------------------------------------------------------------

coefs = st.floats(-2, 2, allow_nan=False)


def random_form(draw_coefs, degree, chart=CHART4):
    comps = {}
    for idx, c in zip(itertools.combinations(range(chart.dim), degree), draw_coefs):
        comps[idx] = ScalarField.constant(c, chart)
    return FormField(chart, degree, comps)


@st.composite
def const_forms(draw, degree):
    n = len(list(itertools.combinations(range(4), degree)))
    return random_form(draw(st.lists(coefs, min_size=n, max_size=n)), degree)


@given(st.integers(0, 2), st.integers(0, 2), st.data())
def test_wedge_graded_commutative(k, l, data):
    a, b = data.draw(const_forms(k)), data.draw(const_forms(l))
    p = [0.1, 0.2, 0.3, 0.4]
    np.testing.assert_allclose(wedge(a, b)(p), (-1) ** (k * l) * wedge(b, a)(p), atol=1e-12)


@given(const_forms(1), const_forms(1), const_forms(2))
def test_wedge_associative(a, b, c):
    p = [0.0, 0.0, 0.0, 0.0]
    np.testing.assert_allclose(wedge(wedge(a, b), c)(p), wedge(a, wedge(b, c))(p), atol=1e-12)


monomials = st.sampled_from(["1", "t", "x", "y", "t*x", "x*y*y", "t*t*y", "x*x*x", "t*x*y"])


@given(st.lists(st.tuples(coefs, monomials), min_size=3, max_size=3))
def test_dd_vanishes_on_polynomial_one_forms(terms):
    comps = [f"{c!r}*{m}" for c, m in terms]
    a = one_form(CHART3, comps)
    dd = exterior_derivative(exterior_derivative(a))
    assert np.max(np.abs(dd([0.3, -0.5, 0.9]))) <= 1e-12


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5))
def test_fd_gradient_matches_analytic(x0, y0):
    f = ScalarField.from_expression("sin(t)*exp(x) + y*y*x", CHART3)
    p = [0.2, x0, y0]
    np.testing.assert_allclose(f.fd_gradient(p, 1e-3), f.gradient(p), atol=1e-9)


def test_chart_validation():
    with pytest.raises(GeometryError):
        Chart(("t", "x"), (1, -1), ((0, 1), (0, 1)))
    with pytest.raises(GeometryError):
        Chart(("t",), (-1,), ((0, 1),))
    with pytest.raises(GeometryError):
        Chart(("t", "x"), (-1, 1), ((0, 1), (1, 0)))


def test_fit_step_shrinks_near_faces():
    assert CHART3.fit_step([1.99, 0, 0], 1e-2) == pytest.approx(0.005)
    assert CHART3.fit_step([0, 0, 0], 1e-2) == 1e-2
    with pytest.raises(DomainError):
        CHART3.fit_step([2.0, 0, 0], 1e-2)


def test_ldl_coframe_reproduces_metric_with_timelike_first_leg():
    metric = fx.perturbed_flat_metric(4)
    frame = fx.perturbed_flat(4)
    p = [0.3, -0.2, 0.1, 0.0]
    e = frame.matrix(p)
    np.testing.assert_allclose(e.T @ np.diag([-1.0, 1, 1, 1]) @ e, metric(p), atol=1e-14)
