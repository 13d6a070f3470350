import jax
import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kkcartan import fixtures
from kkcartan.errors import GeometryError, QuadratureError
from kkcartan.frame_algebra import MetricField
from kkcartan.quasi_local import (
    OpticalFrame,
    RadialField,
    commutator_coefficients,
    cronstrom_connection,
    frame_commutator,
    lie_bracket_fd,
    matrix_curvature,
    normal_origin,
    optical_gradient_defect,
    optical_killing_forms,
    scaling_exponent,
)

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
CHART = fixtures.minkowski().chart
RNG = np.random.default_rng(7)


def antisym(a):
    return a - np.swapaxes(a, -1, -2)


# -- radial-gauge connection --------------------------------------------------


def test_zero_curvature_gives_zero_connection():
    rf = RadialField(lambda y: np.zeros((4, 4, 4, 4)))
    assert np.all(cronstrom_connection(rf, [0.3, 0.2, -0.1, 0.5]) == 0.0)


def test_constant_curvature_closed_form():
    F = antisym(RNG.normal(size=(4, 4)))
    rf = RadialField(lambda y: F)
    x = np.array([0.4, -0.3, 0.2, 0.7])
    assert np.max(np.abs(cronstrom_connection(rf, x) + 0.5 * F @ x)) <= 1e-12


def test_linear_curvature_closed_form():
    G = RNG.normal(size=(4, 4, 4))  # F_{mu nu}(y) = G[mu, nu, rho] y^rho
    G = G - G.transpose(1, 0, 2)
    rf = RadialField(lambda y: G @ y, nodes=4)
    x = np.array([0.4, -0.3, 0.2, 0.7])
    th, est = cronstrom_connection(rf, x, return_estimate=True)
    expected = -np.einsum("mnr,n,r->m", G, x, x) / 3.0
    assert np.max(np.abs(th - expected)) <= 1e-12
    assert est <= 1e-12


def test_base_point_shift():
    F = antisym(RNG.normal(size=(4, 4)))
    base = np.array([0.1, 0.2, -0.3, 0.0])
    rf = RadialField(lambda y: F, base)
    x = np.array([0.5, 0.1, 0.1, 0.2])
    assert np.allclose(cronstrom_connection(rf, x), -0.5 * F @ (x - base), atol=1e-14)


def test_quadrature_failure_is_reported():
    rf = RadialField(lambda y: np.sin(400.0 * y[0]) * np.array([[0.0, 1.0], [-1.0, 0.0]]), np.zeros(2), nodes=4)
    with pytest.raises(QuadratureError) as err:
        cronstrom_connection(rf, [1.0, 0.3])
    assert err.value.estimate > 0


def test_nonfinite_sampler_rejected():
    rf = RadialField(lambda y: np.full((2, 2), np.nan), np.zeros(2))
    with pytest.raises(GeometryError):
        cronstrom_connection(rf, [0.1, 0.1])


def test_constant_curvature_reassembles_abelian():
    # all components along one generator, so Theta ^ Theta drops out
    gen = np.zeros((4, 4))
    gen[0, 1] = gen[1, 0] = 1.0
    f = antisym(RNG.normal(size=(4, 4)))
    F = np.einsum("ab,mn->abmn", gen, f)
    rf = RadialField(lambda y: F)
    x = np.array([0.2, 0.1, -0.4, 0.3])
    rebuilt = matrix_curvature(lambda y: cronstrom_connection(rf, y), x)
    assert np.max(np.abs(rebuilt - F)) <= 1e-6


def _radial_connection():
    M = antisym(RNG.normal(size=(4, 4, 4, 4)))
    N = RNG.normal(size=(4, 4, 4, 4, 4)) * 0.3
    N = N - N.transpose(0, 1, 3, 2, 4)

    def theta(x):
        return jnp.einsum("abmn,n->abm", M, x) + jnp.einsum("abmnr,n,r->abm", N, x, x)

    dtheta = jax.jacfwd(theta)

    def curvature(x):
        th, d = theta(x), dtheta(x)
        w = jnp.einsum("acm,cbn->abmn", th, th)
        return np.asarray(jnp.swapaxes(d, -1, -2) - d + w - jnp.swapaxes(w, -1, -2))

    return theta, curvature


def test_recovers_nonabelian_radial_connection():
    # a connection with x^mu Theta_mu = 0 is fixed by its own curvature
    theta, curvature = _radial_connection()
    x = np.array([0.3, -0.2, 0.5, 0.1])
    assert abs(np.einsum("abm,m->ab", theta(x), x)).max() <= 1e-14
    rf = RadialField(curvature, nodes=8)
    assert np.max(np.abs(cronstrom_connection(rf, x) - np.asarray(theta(x)))) <= 1e-12
    rebuilt = matrix_curvature(lambda y: cronstrom_connection(rf, y), x)
    assert np.max(np.abs(rebuilt - curvature(x))) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(arrays(float, (4, 4), elements=st.floats(-3, 3)), arrays(float, 4, elements=st.floats(-2, 2)))
def test_radial_gauge_condition(f, x):
    F = antisym(f)
    rf = RadialField(lambda y: F * (1.0 + 0.2 * y[0]))
    th = cronstrom_connection(rf, x)
    assert abs(th @ x) <= 1e-12 * (1.0 + np.abs(F).max() * (x @ x))


def test_from_curvature_flat():
    fr = fixtures.minkowski()
    from kkcartan.cartan_curvature import curvature_two_forms

    rf = RadialField.from_curvature(curvature_two_forms(fr))
    assert np.max(np.abs(cronstrom_connection(rf, [0.2, 0.3, 0.1, -0.4]))) <= 1e-14


# -- optical forms ------------------------------------------------------------


def _gauss_metric(eps, seed=3):
    # h_{mu nu} = R_{mu a nu b} x^a x^b with an algebraic curvature tensor, so h x = 0
    S = np.random.default_rng(seed).normal(size=(4, 4)) * 0.5
    S = S + S.T
    R = np.einsum("mn,ab->manb", S, S) - np.einsum("mb,an->manb", S, S)

    def fn(x, p):
        return ETA + p * jnp.einsum("manb,a,b->mn", R, x, x)

    return MetricField(CHART, fn, eps)


def _conformal_fn(x, p):
    return (1.0 + p * jnp.sum(x * x)) * ETA


def test_minkowski_optical_values():
    of = OpticalFrame(fixtures.minkowski().metric())
    out = optical_killing_forms(of, [0.3, 0.1, -0.2, 0.4])
    assert np.allclose(out["K"], 4 * ETA, atol=1e-14)
    assert np.allclose(out["CK"], 0.0, atol=1e-14)
    assert out["box_f"] == pytest.approx(8.0, abs=1e-14)
    assert np.allclose(out["K_closed"], 4 * ETA, atol=1e-14)
    assert out["box_closed"] == pytest.approx(8.0, abs=1e-14)


def test_gauss_lemma_metric_routes_agree():
    of = OpticalFrame(_gauss_metric(0.1))
    x = np.array([0.2, 0.15, -0.3, 0.2])
    defect = optical_gradient_defect(of, x)
    assert np.max(np.abs(defect["gradient"])) <= 1e-14
    assert abs(defect["eikonal"]) <= 1e-14
    out = optical_killing_forms(of, x)
    for key in ("K", "CK"):
        assert np.max(np.abs(out[key] - out[key + "_closed"])) <= 1e-12
    assert out["box_f"] == pytest.approx(out["box_closed"], abs=1e-12)


def test_fd_mode_matches_ad():
    x = np.array([0.2, 0.15, -0.3, 0.2])
    ad = optical_killing_forms(OpticalFrame(_gauss_metric(0.1)), x)
    fd = optical_killing_forms(OpticalFrame(_gauss_metric(0.1), mode="fd"), x)
    assert np.max(np.abs(ad["K"] - fd["K"])) <= 1e-9


def test_ck_vanishes_quadratically():
    of = OpticalFrame(_gauss_metric(0.05))
    direction = np.array([0.5, 0.3, -0.6, 0.4])
    radii = 2.0 ** -np.arange(1, 7)
    norms = [np.linalg.norm(optical_killing_forms(of, r * direction)["CK"]) for r in radii]
    assert scaling_exponent(radii, norms) == pytest.approx(2.0, abs=0.1)


def test_ck_scales_with_amplitude():
    x = np.array([0.1, 0.2, 0.05, -0.1])
    a = np.linalg.norm(optical_killing_forms(OpticalFrame(_gauss_metric(1e-3)), x)["CK"])
    b = np.linalg.norm(optical_killing_forms(OpticalFrame(_gauss_metric(2e-3)), x)["CK"])
    assert b / a == pytest.approx(2.0, rel=1e-2)


def test_conformal_factor_trace_term():
    eps = 0.01
    of = OpticalFrame(MetricField(CHART, _conformal_fn, eps))
    x = np.array([0.5, 0.3, -0.6, 0.4])
    s = x @ x
    out = optical_killing_forms(of, x)
    assert out["box_closed"] - 8.0 == pytest.approx(8 * eps * s / (1 + eps * s), abs=1e-8)
    # these coordinates are not normal-type, so the covariant wave operator differs
    assert abs(optical_gradient_defect(of, x)["eikonal"]) > 1e-3


@settings(max_examples=30, deadline=None)
@given(arrays(float, 4, elements=st.floats(-0.8, 0.8)), st.floats(0.0, 0.2))
def test_conformal_form_is_traceless_and_consistent(x, eps):
    of = OpticalFrame(MetricField(CHART, _conformal_fn, eps))
    out = optical_killing_forms(of, x)
    g = np.asarray(_conformal_fn(jnp.asarray(x), eps))
    assert np.max(np.abs(out["CK"] - (out["K"] - 0.5 * g * out["box_f"]))) <= 1e-12
    assert np.max(np.abs(out["CK_closed"] - (out["K_closed"] - 0.5 * g * out["box_closed"]))) <= 1e-12
    assert abs(np.einsum("ab,ab->", np.linalg.inv(g), out["CK"])) <= 1e-11


def test_normal_origin_pullback():
    def fn(x, p):
        return jnp.array([[-2.0, 0.3, 0, 0], [0.3, 1.5, 0, 0], [0, 0, 1.0, 0.2], [0, 0, 0.2, 3.0]]) + 0.0 * x[0]

    pulled = normal_origin(MetricField(CHART, fn))
    assert np.allclose(pulled(np.zeros(4)), ETA, atol=1e-14)
    out = optical_killing_forms(OpticalFrame(pulled), [0.1, 0.2, 0.3, 0.1])
    assert np.allclose(out["CK"], 0.0, atol=1e-13)


def test_degenerate_metric_rejected():
    of = OpticalFrame(MetricField(CHART, lambda x, p: jnp.zeros((4, 4)) + 0.0 * x[0]))
    with pytest.raises(GeometryError):
        optical_killing_forms(of, [0.1, 0.1, 0.1, 0.1])


def test_scaling_exponent_rejects_nonpositive():
    with pytest.raises(ValueError):
        scaling_exponent([1.0, 0.5], [1.0, 0.0])


# -- frame commutators --------------------------------------------------------


def test_minkowski_commutators_vanish():
    fr = fixtures.minkowski()
    for a, b in [(0, 1), (1, 2), (2, 3)]:
        assert np.max(np.abs(frame_commutator(fr, None, a, b, [0.1, 0.2, 0.3, 0.4]))) <= 1e-14


@pytest.mark.parametrize("t", [0.5, 1.3, 4.0])
def test_kasner_time_space_commutator(t):
    p = (2 / 3, 2 / 3, -1 / 3)
    fr = fixtures.kasner(*p)
    x = np.array([t, 0.1, 0.2, 0.3])
    for i in (1, 2, 3):
        c = commutator_coefficients(fr, None, 0, i, x)
        expected = np.zeros(4)
        expected[i] = -p[i - 1] / t
        assert np.allclose(c, expected, atol=1e-12)


FIXTURES = [
    (fixtures.schwarzschild(1.0), np.array([0.0, 4.0, 1.1, 0.3])),
    (fixtures.schwarzschild(1.0), np.array([2.0, 7.5, 2.0, -1.0])),
    (fixtures.kasner(2 / 3, 2 / 3, -1 / 3), np.array([1.3, 0.1, 0.2, 0.3])),
    (fixtures.conformally_flat(), np.array([1.2, 0.3, -0.4, 0.5])),
    (fixtures.perturbed_flat(11, 0.05), np.array([0.2, -0.5, 0.4, 0.1])),
]


@pytest.mark.parametrize("frame, x", FIXTURES)
def test_commutator_matches_fd_bracket(frame, x):
    n = frame.chart.dim
    for a in range(n):
        for b in range(a + 1, n):
            diff = frame_commutator(frame, None, a, b, x) - lie_bracket_fd(frame, a, b, x)
            assert np.max(np.abs(diff)) <= 1e-6


def test_schwarzschild_time_radial_leg():
    m, r = 1.0, 4.0
    fr = fixtures.schwarzschild(m)
    x = np.array([0.0, r, 1.1, 0.3])
    # e_t = f^{-1/2} d_t, e_r = f^{1/2} d_r with f = 1 - 2m/r, so [e_t, e_r] = f'/(2f) d_t
    f = 1 - 2 * m / r
    bracket = frame_commutator(fr, None, 0, 1, x)
    assert bracket[0] == pytest.approx(0.5 * (2 * m / r**2) / f, rel=1e-10)
    assert np.max(np.abs(bracket[1:])) <= 1e-12
