import numpy as np
import pytest

import toricflow as tf
from toricflow.errors import NewtonError


def _fd_grad(f, x, h=1e-6):
    out = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out


def test_isotropic_quadratic_triple():
    phi = tf.QuadraticPotential(np.eye(2))
    x = np.array([0.3, -0.4])
    assert phi.value(x) == pytest.approx(0.125)
    assert np.allclose(phi.grad(x), [0.3, -0.4])
    assert np.allclose(phi.hess(x), np.eye(2))


def test_anisotropic_quadratic_triple(phi_aniso):
    x = np.array([1.0, 1.0])
    assert phi_aniso.value(x) == pytest.approx(3.0)
    assert np.allclose(phi_aniso.grad(x), [2.0, 4.0])


def test_exponential_perturbation():
    phi = tf.PerturbedQuadratic(
        tf.QuadraticPotential([[1.0]]), [tf.ExponentialTerm(0.1, (1.0,))]
    )
    x = np.array([0.0])
    assert phi.value(x) == pytest.approx(0.1)
    assert phi.grad(x)[0] == pytest.approx(0.1)
    assert phi.hess(x)[0, 0] == pytest.approx(1.1)


@pytest.mark.parametrize(
    "phi",
    [
        tf.QuadraticPotential([[2.0, 0.5], [0.5, 4.0]], b=[0.1, -0.2], c=0.3),
        tf.PerturbedQuadratic(
            tf.QuadraticPotential(np.eye(2)), [tf.ExponentialTerm(0.05, (1.0, -0.5))]
        ),
        tf.LogSumExpPotential([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
    ],
)
def test_grad_hess_consistent_with_finite_differences(phi, rng):
    for _ in range(5):
        x = rng.uniform(-0.5, 0.5, size=2)
        g = phi.grad(x)
        g_fd = _fd_grad(phi.value, x)
        assert np.max(np.abs(g - g_fd)) < 1e-6 * max(1.0, np.max(np.abs(g)))
        H = phi.hess(x)
        H_fd = np.column_stack(
            [_fd_grad(lambda q, i=i: phi.grad(q)[i], x) for i in range(2)]
        )
        assert np.max(np.abs(H - H_fd)) < 1e-6 * max(1.0, np.max(np.abs(H)))


def test_batched_evaluation_matches_pointwise(phi_aniso, rng):
    xs = rng.uniform(-1, 1, size=(7, 2))
    vals = phi_aniso.value(xs)
    grads = phi_aniso.grad(xs)
    for i, x in enumerate(xs):
        assert vals[i] == pytest.approx(phi_aniso.value(x))
        assert np.allclose(grads[i], phi_aniso.grad(x))


# -- concentration rate f_lam -------------------------------------------------


def test_concentration_rate_values():
    phi = tf.QuadraticPotential([[1.0]])
    assert tf.concentration_rate(phi, [0.0], np.array([0.5])) == pytest.approx(0.125)
    assert tf.concentration_rate(phi, [0.5], np.array([0.5])) == pytest.approx(-0.125)
    # lam = 1 at x = 0.5: (x - 1) x - x^2/2 = -0.375
    assert tf.concentration_rate(phi, [1.0], np.array([0.5])) == pytest.approx(-0.375)


def test_concentration_rate_at_center_is_minus_phi(rng):
    phi = tf.QuadraticPotential([[2.0, 0.0], [0.0, 4.0]], b=[0.3, -0.1], c=0.7)
    for _ in range(5):
        lam = rng.uniform(-1, 1, size=2)
        assert tf.concentration_rate(phi, lam, lam) == pytest.approx(-phi.value(lam))


def test_concentration_rate_grad_identity(phi_aniso, rng):
    lam = np.array([0.2, 0.4])
    for _ in range(5):
        x = rng.uniform(-1, 1, size=2)
        g = tf.concentration_rate_grad(phi_aniso, lam, x)
        g_fd = _fd_grad(lambda q: tf.concentration_rate(phi_aniso, lam, q), x)
        assert np.max(np.abs(g - g_fd)) < 1e-6
        assert np.allclose(g, phi_aniso.hess(x) @ (x - lam))


def test_concentration_functional_invariants(phi_aniso):
    functional = tf.ConcentrationFunctional(phi_aniso, (0.3, 0.4))
    center = np.array([0.3, 0.4])
    assert functional.value(center) == pytest.approx(-phi_aniso.value(center))
    assert np.max(np.abs(functional.grad(center))) < 1e-14
    assert np.allclose(functional.hess_at_center(), phi_aniso.hess(center))


def test_constant_shift_of_phi_shifts_f_lambda_by_minus_c(rng):
    base = tf.QuadraticPotential([[1.0]])
    shifted = tf.QuadraticPotential([[1.0]], c=0.7)
    xs = rng.uniform(-1, 1, size=(6, 1))
    lam = np.array([0.3])
    d = tf.concentration_rate(shifted, lam, xs) - tf.concentration_rate(base, lam, xs)
    assert np.allclose(d, -0.7)


def test_f_lambda_min_check_1d(cp1_unit, phi_1d):
    chk = tf.f_lambda_min_check(phi_1d, [0.5], cp1_unit, resolution=256)
    assert chk.ok
    assert chk.distance_to_center <= 1.0 / 256 + 1e-12
    assert chk.hessian_min_eigenvalue == pytest.approx(1.0)


def test_f_lambda_min_check_2d(phi_aniso):
    poly = tf.standard_simplex(2, 1.0)
    chk = tf.f_lambda_min_check(phi_aniso, [0.2, 0.2], poly, resolution=128)
    assert chk.ok


def test_f_lambda_min_check_flags_nonconvex(cp1_unit):
    # concave potential: the grid minimum lands far from the center
    bad = tf.CallablePotential(
        1,
        lambda x: -np.sum(x**2, axis=-1),
        lambda x: -2 * x,
        lambda x: np.broadcast_to(-2 * np.eye(1), x.shape[:-1] + (1, 1)),
        label="concave",
    )
    chk = tf.f_lambda_min_check(bad, [0.5], cp1_unit, resolution=64)
    assert not chk.ok


# -- Legendre utilities ----------------------------------------------------------


def test_legendre_dual_quadratic():
    g = tf.QuadraticPotential([[1.0]])
    dual = tf.legendre_dual(g, np.array([0.4]))
    assert dual.y[0] == pytest.approx(0.4)
    assert dual.value == pytest.approx(0.08)


def test_legendre_dual_guillemin(cp1_unit):
    g0 = tf.SymplecticPotential(cp1_unit)
    dual = tf.legendre_dual(g0, np.array([0.5]))
    assert dual.y[0] == pytest.approx(0.0)
    assert dual.value == pytest.approx(0.5 * np.log(2))


def test_legendre_inverse_quadratic():
    g = tf.QuadraticPotential([[1.0]])
    x = tf.legendre_inverse(g, np.array([0.7]), x0=np.array([0.0]))
    assert x[0] == pytest.approx(0.7, abs=1e-12)


def test_legendre_inverse_roundtrip(rng):
    g = tf.QuadraticPotential([[2.0, 0.3], [0.3, 1.0]])
    for _ in range(5):
        x = rng.uniform(-1, 1, size=2)
        y = g.grad(x)
        back = tf.legendre_inverse(g, y, x0=np.zeros(2))
        assert np.max(np.abs(back - x)) < 1e-10


def test_legendre_inverse_budget_exhaustion(cp1_unit):
    g0 = tf.SymplecticPotential(cp1_unit)
    with pytest.raises(NewtonError):
        tf.legendre_inverse(
            g0,
            np.array([40.0]),
            x0=np.array([0.5]),
            max_iter=3,
            domain=lambda q: bool(cp1_unit.facet_values(q).min() > 0),
        )


# -- strict convexity --------------------------------------------------------------


def test_strict_convexity_identity(cp1_unit):
    samples = np.array([p for p, _ in tf.interior_grid(cp1_unit, 16)])
    phi2 = tf.QuadraticPotential(np.eye(1))
    report = tf.check_strict_convexity(phi2, samples)
    assert report.ok
    assert report.min_eigenvalue == pytest.approx(1.0)


def test_strict_convexity_anisotropic(phi_aniso):
    samples = np.array([[0.1, 0.2], [0.5, 0.1]])
    report = tf.check_strict_convexity(phi_aniso, samples)
    assert report.min_eigenvalue == pytest.approx(2.0)


def test_strict_convexity_failure_with_witness():
    cubic = tf.CallablePotential(
        1,
        lambda x: np.sum(x**3, axis=-1),
        lambda x: 3 * x**2,
        lambda x: (6 * x)[..., None],
        label="cubic",
    )
    samples = np.array([[0.0], [0.01], [0.5]])
    report = tf.check_strict_convexity(cubic, samples)
    assert not report.ok
    assert report.min_eigenvalue <= 0.0
    assert report.witness == (0.0,)


def test_reflected_potential(phi_1d, rng):
    refl = tf.ReflectedPotential(phi_1d, [2.0])
    for _ in range(5):
        x = rng.uniform(0.1, 1.9, size=1)
        assert refl.value(x) == pytest.approx(phi_1d.value(2.0 - x))
        assert refl.grad(x)[0] == pytest.approx(-phi_1d.grad(2.0 - x)[0])
