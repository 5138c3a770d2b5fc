import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from wpap import (APSignal, EvolutionFamily, LinearFamily, PreconditionError, alpha_norm,
                  check_AT, check_H4, dichotomy, fit_estimate, green_kernel)
from wpap.evolution import (check_exponents, embedding_constant, interpolation_constant,
                            operator_bound, spectral_projection)

SQRT2 = np.sqrt(2.0)


def two_tone_family():
    d = APSignal.sin(1.0) + APSignal.sin(SQRT2)
    return LinearFamily.modulated([[-1.0]], d, offset=3.0)


@pytest.fixture(scope="module")
def saddle():
    ef = EvolutionFamily(LinearFamily.constant(np.diag([-1.0, 1.0])))
    return ef, dichotomy(ef)


@pytest.fixture(scope="module")
def modulated():
    ef = EvolutionFamily(two_tone_family())
    return ef, dichotomy(ef)


def test_modulated_propagator_closed_form():
    fam = LinearFamily.modulated([[-1.0]], lambda t: 2 + np.sin(t))
    ef = EvolutionFamily(fam)
    # int_0^pi (2 + sin r) dr = 2 pi + 2
    assert ef.propagator(np.pi, 0.0)[0, 0] == pytest.approx(np.exp(-(2 * np.pi + 2)), rel=1e-10)


def test_constant_propagator_is_matrix_exponential():
    A = np.array([[-1.0, 2.0], [0.0, -3.0]])
    ef = EvolutionFamily(LinearFamily.constant(A))
    np.testing.assert_allclose(ef.propagator(1.7, 0.2), expm(1.5 * A), rtol=1e-12)


def test_tabulated_propagator_matches_ode_integrator():
    def A(t):
        return np.array([[-2 - np.sin(t), 0.5 * np.cos(t)], [0.3, -1.5]])
    ef = EvolutionFamily(LinearFamily.tabulated(A), step=0.01)
    sol = solve_ivp(lambda t, y: A(t) @ y, (0.3, 2.3), [1.0, -1.0], rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ef.propagate(2.3, 0.3, [1.0, -1.0]), sol.y[:, -1], atol=1e-9)


@given(st.floats(-10, 10), st.floats(0, 5), st.floats(0, 5))
@settings(max_examples=30, deadline=None)
def test_cocycle_law_tabulated(r, a, b):
    def A(t):
        return np.array([[-2 - np.sin(t), 0.5], [0.1 * np.cos(t), -1.0]])
    ef = EvolutionFamily(LinearFamily.tabulated(A), step=0.01)
    s, t = r + a, r + a + b
    assert ef.cocycle_defect(t, s, r) <= 1e-10


@given(st.floats(-20, 20), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_cocycle_law_modulated(r, a, b):
    ef = EvolutionFamily(LinearFamily.modulated(np.diag([-1.0, 1.0]),
                                                APSignal.sin(1.0) + APSignal.sin(SQRT2),
                                                offset=3.0))
    assert ef.cocycle_defect(r + a + b, r + a, r) <= 1e-8


def test_propagator_identity_on_diagonal():
    ef = EvolutionFamily(two_tone_family())
    np.testing.assert_allclose(ef.propagator(1.3, 1.3), np.eye(1))


def test_singular_generator_rejected():
    with pytest.raises(PreconditionError):
        LinearFamily.constant([[0.0, 0.0], [0.0, -1.0]])


def test_nonpositive_modulation_rejected():
    with pytest.raises(PreconditionError):
        LinearFamily.modulated([[-1.0]], lambda t: np.sin(t))


def test_saddle_dichotomy(saddle):
    ef, dd = saddle
    np.testing.assert_allclose(dd.P, np.diag([1.0, 0.0]), atol=1e-14)
    assert dd.delta == pytest.approx(1.0, rel=1e-3)
    assert dd.N == pytest.approx(1.0, rel=1e-6)
    assert dd.has_unstable


def test_modulated_dichotomy(modulated):
    ef, dd = modulated
    np.testing.assert_allclose(dd.P, np.eye(1))
    assert dd.delta >= 1.0
    assert not dd.has_unstable


def test_green_kernel_branches(saddle):
    ef, dd = saddle
    np.testing.assert_allclose(green_kernel(ef, dd, 0.0, 1.0, [1.0, 1.0]),
                               [0.0, -np.exp(-1.0)], atol=1e-14)
    np.testing.assert_allclose(green_kernel(ef, dd, 1.0, 0.0, [1.0, 1.0]),
                               [np.exp(-1.0), 0.0], atol=1e-14)


def test_imaginary_axis_eigenvalue_rejected():
    with pytest.raises(PreconditionError):
        spectral_projection(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_tabulated_family_with_unstable_part_rejected():
    ef = EvolutionFamily(LinearFamily.tabulated(lambda t: np.diag([-1.0, 1.0 + 0.1 * np.sin(t)])))
    with pytest.raises(PreconditionError):
        dichotomy(ef)


@given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=3),
       st.lists(st.booleans(), min_size=3, max_size=3), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_spectral_projection_properties(mags, signs, seed):
    lam = np.array([m if s else -m for m, s in zip(mags, signs)])
    V = np.random.default_rng(seed).normal(size=(3, 3)) + 3 * np.eye(3)
    A = V @ np.diag(lam) @ np.linalg.inv(V)
    P = spectral_projection(A)
    np.testing.assert_allclose(P @ P, P, atol=1e-8)
    np.testing.assert_allclose(P @ A, A @ P, atol=1e-7 * np.abs(A).max())
    assert np.trace(P) == pytest.approx((lam < 0).sum(), abs=1e-8)


def test_defective_matrix_projection():
    A = np.array([[-1.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]])
    P = spectral_projection(A)
    np.testing.assert_allclose(P, np.diag([1.0, 1.0, 0.0]), atol=1e-10)


def test_alpha_norm_scalar():
    # sup_r r^(1/2) / (r + 1) = 1/2 at r = 1
    an = alpha_norm(LinearFamily.constant([[-1.0]], omega=0.0), [1.0], 0.5)
    assert an.value == pytest.approx(0.5, rel=1e-12)
    assert an.r_max == pytest.approx(1.0)


def test_alpha_norm_second_mode():
    # sup_r r^(1/2) * 4 / (r + 4) = 1 at r = 4
    fam = LinearFamily.constant(np.diag([-1.0, -4.0]), omega=0.0)
    assert alpha_norm(fam, [0.0, 1.0], 0.5).value == pytest.approx(1.0, rel=1e-3)


def test_alpha_zero_is_ambient_norm():
    fam = LinearFamily.constant(np.diag([-1.0, -4.0]))
    assert alpha_norm(fam, [3.0, 4.0], 0.0).value == pytest.approx(5.0)


@given(st.floats(0.05, 0.95), st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_interpolation_inequality(alpha, scale):
    # |x|_alpha <= c |x|^(1-alpha) |A x|^alpha
    A = np.diag([-1.0, -4.0])
    fam = LinearFamily.constant(A, omega=0.0)
    x = scale * np.array([1.0, -2.0])
    lhs = alpha_norm(fam, x, alpha).value
    c = interpolation_constant(A, 0.0, alpha)
    rhs = c * np.linalg.norm(x) ** (1 - alpha) * np.linalg.norm(A @ x) ** alpha
    assert lhs <= rhs * (1 + 1e-9)


def test_embedding_constant_bounds_ratio():
    A = np.diag([-1.0, -4.0])
    k = embedding_constant(A, 0.0, 0.4, 0.8)
    fam = LinearFamily.constant(A, omega=0.0)
    for x in ([1.0, 0.0], [0.0, 1.0], [1.0, 1.0]):
        assert alpha_norm(fam, x, 0.4).value <= k * alpha_norm(fam, x, 0.8).value * (1 + 1e-9)


def test_operator_bound_dominates_samples(rng):
    M = np.stack([np.diag([1.0 + r, 2.0]) for r in np.linspace(0, 1, 5)])
    T = rng.normal(size=(2, 2))
    bound = operator_bound(M, T)
    for _ in range(20):
        x = rng.normal(size=2)
        lhs = np.max(np.linalg.norm(M @ (T @ x), axis=1))
        rhs = np.max(np.linalg.norm(M @ x, axis=1))
        assert lhs <= bound * rhs * (1 + 1e-9)


@pytest.mark.parametrize("args", [(0.0,), (1.0,), (0.6, 0.5, 0.1), (0.6, 0.8, 0.3), (0.6, 0.8, 0.7)])
def test_exponent_constraints(args):
    with pytest.raises(PreconditionError):
        check_exponents(*args)


def test_scalar_eq11_rate():
    ef = EvolutionFamily(LinearFamily.constant([[-1.0]]))
    fit = fit_estimate(ef, dichotomy(ef), "eq1.1", 0.5)
    assert np.isfinite(fit.prefactor) and fit.decay_rate >= 0.5 * 0.95
    assert fit.rate_ok


def test_saddle_eq21_rate(saddle):
    fit = fit_estimate(*saddle, "eq2.1", 0.5)
    assert fit.decay_rate >= 0.95 and fit.rate_ok


def test_scalar_beta2_rate():
    ef = EvolutionFamily(LinearFamily.constant([[-1.0]]))
    dd = dichotomy(ef)
    fit = fit_estimate(ef, dd, "beta2", 0.6, 0.8, 0.1)
    assert fit.decay_rate >= dd.delta / 4 * 0.95 and fit.rate_ok


def test_stable_family_has_no_unstable_estimates():
    ef = EvolutionFamily(LinearFamily.constant([[-1.0]]))
    fit = fit_estimate(ef, dichotomy(ef), "eq2.1", 0.5)
    assert fit.prefactor == 0 and fit.rate_ok


def test_at_conditions_constant_generator():
    assert check_AT(LinearFamily.constant([[-1.0]], omega=0.0)).passed


def test_at_conditions_smooth_modulation():
    rep = check_AT(LinearFamily.modulated([[-1.0]], lambda t: 3 + np.sin(t)))
    assert rep.passed
    assert rep.fitted_exponent == pytest.approx(1.0, abs=0.1)


def test_at_conditions_reject_jump():
    rep = check_AT(LinearFamily.modulated([[-1.0]], lambda t: 3 + np.sign(np.sin(t))))
    assert not rep.passed


def test_h4_domination_for_good_shift(modulated):
    ef, dd = modulated
    d = APSignal.sin(1.0) + APSignal.sin(SQRT2)
    taus = np.arange(0.0, 200.0, 0.01)[1:]
    good = taus[np.argmin(d.defect_bound(taus))]
    rep_good = check_H4(ef, good, 0.2, delta=dd.delta)
    rep_bad = check_H4(ef, np.pi, 0.2, delta=dd.delta)
    assert rep_good.dominated
    assert rep_good.epsilon_required < rep_bad.epsilon_required
