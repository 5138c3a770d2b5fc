import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson, solve_ivp
from scipy.linalg import expm

from wpap import (LinearFamily, MildProblem, PreconditionError, SampledPath, Weight,
                  contraction_constant, gamma1, gamma2, gamma3, gamma4, map_M,
                  mild_identity_residual, solve, verify_wpap)
from wpap.mild import GATE, _poly_exp_integrals

SCALAR = LinearFamily.constant([[-1.0]])
SADDLE = LinearFamily.constant(np.diag([-1.0, 1.0]))


def g_sin(t, V):
    return np.sin(t)[:, None] + 0.0 * V


def g_sin_coupled(t, V):
    return np.sin(t)[:, None] + 0.05 * V


def benchmark(coupled=False, **kw):
    g = g_sin_coupled if coupled else g_sin
    return MildProblem(SCALAR, g=g, C=np.eye(1), K=0.05 if coupled else 0.0,
                       alpha=0.6, beta=0.8, mu=0.1, **kw)


def ode_oracle(t_eval, coef=0.05, burn_in=40.0):
    """Integrate u' = -u + sin t + coef u from rest far in the past."""
    t0 = t_eval[0] - burn_in
    sol = solve_ivp(lambda t, u: -u + np.sin(t) + coef * u, (t0, t_eval[-1]), [0.0],
                    t_eval=np.concatenate(([t0], t_eval)), rtol=1e-12, atol=1e-14,
                    method="DOP853")
    return sol.y[0, 1:]


@pytest.fixture(scope="module")
def scalar_solution():
    p = benchmark()
    return p, *solve(p, 10.0, step=0.02)


@pytest.fixture(scope="module")
def coupled_solution():
    p = benchmark(coupled=True)
    return p, *solve(p, 10.0, step=0.02)


def test_gamma1_decaying_forcing():
    # -int_{-inf}^t exp(-(t-s)) exp(-|s|) ds, evaluated with mpmath
    p = MildProblem(SCALAR, f=lambda t, V: np.exp(-np.abs(t))[:, None] + 0 * V,
                    alpha=0.6, beta=0.8, mu=0.1)
    u = SampledPath.from_function(lambda t: np.zeros_like(t), 45.0, 0.01)
    vals = gamma1(u, p, t=np.array([-1.0, 0.5, 2.0]))[0]
    np.testing.assert_allclose(vals, [-0.18393972058572116, -0.60653065971263342,
                                      -0.33833820809153173], atol=5e-5)


def test_gamma3_sine():
    p = MildProblem(SCALAR, g=g_sin, alpha=0.6, beta=0.8, mu=0.1)
    u = SampledPath.from_function(lambda t: np.zeros_like(t), 50.0, 0.02)
    t = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(gamma3(u, p, t=t)[0], (np.sin(t) - np.cos(t)) / 2, atol=1e-7)


def test_gamma4_constant_unstable_forcing():
    p = MildProblem(SADDLE, g=lambda t, V: np.tile([0.0, 1.0], (len(t), 1)),
                    alpha=0.6, beta=0.8, mu=0.1)
    u = SampledPath.from_function(lambda t: np.zeros((len(t), 2)), 50.0, 0.02)
    np.testing.assert_allclose(gamma4(u, p, t=np.array([0.0, 3.0])).T,
                               [[0.0, 1.0], [0.0, 1.0]], atol=1e-9)
    np.testing.assert_allclose(gamma3(u, p, t=np.array([0.0])).ravel(), [0.0, 0.0], atol=1e-12)


def test_gamma2_vanishes_without_unstable_part():
    p = MildProblem(SCALAR, f=lambda t, V: np.cos(t)[:, None] + 0 * V,
                    alpha=0.6, beta=0.8, mu=0.1)
    u = SampledPath.from_function(lambda t: np.zeros_like(t), 45.0, 0.05)
    assert np.all(gamma2(u, p) == 0)


@given(st.floats(-3, 3))
@settings(max_examples=15, deadline=None)
def test_gamma3_is_linear_in_forcing(c):
    u = SampledPath.from_function(lambda t: np.zeros_like(t), 45.0, 0.05)
    base = MildProblem(SCALAR, g=g_sin, alpha=0.6, beta=0.8, mu=0.1)
    scaled = MildProblem(SCALAR, g=lambda t, V: c * g_sin(t, V), alpha=0.6, beta=0.8,
                         mu=0.1, ef=base.ef, dd=base.dd)
    np.testing.assert_allclose(gamma3(u, scaled), c * gamma3(u, base), atol=1e-13)


def test_map_cancels_constant_f():
    # A = -1, f = c: phi = -A f = c, its stable convolution is c, so M u = -c + c
    c = 0.3
    p = MildProblem(SCALAR, f=lambda t, V: c + 0 * V, alpha=0.6, beta=0.8, mu=0.1)
    u = SampledPath.from_function(lambda t: np.zeros_like(t), 45.0, 0.05)
    out = map_M(u, p)
    inner = np.abs(u.t) < 5
    np.testing.assert_allclose(out.values[inner], 0.0, atol=1e-9)


@given(st.floats(0.01, 0.5))
@settings(max_examples=20, deadline=None)
def test_polynomial_exponential_integrals(h):
    # int_0^h exp((h - s) M) s^m ds against Simpson quadrature
    M = np.array([[-1.5, 0.2], [0.0, 0.7]])
    E, ints = _poly_exp_integrals(M, h)
    np.testing.assert_allclose(E, expm(h * M), rtol=1e-13)
    s = np.linspace(0, h, 401)
    kern = np.array([expm((h - x) * M) for x in s])
    for m in range(4):
        quad = simpson(kern * (s**m)[:, None, None], x=s, axis=0)
        np.testing.assert_allclose(ints[m], quad, rtol=1e-8, atol=1e-14)


def test_contraction_constant_formula():
    a, d = 0.6, 2.0
    expected = 0.1 * 1.5 * (0.7 + 2 ** 0.4 * d ** (-0.4) * math.gamma(0.4) * (0.3 + 0.5)
                            + (0.2 + 0.4) / d)
    assert contraction_constant(0.1, a, d, 0.5, 0.4, 0.3, 0.2, 0.7, 1.5) == pytest.approx(expected)


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=20, deadline=None)
def test_contraction_constant_monotone_in_K(k1, k2):
    lo, hi = sorted((k1, k2))
    args = (0.6, 1.0, 0.5, 0.4, 0.3, 0.2, 0.7, 1.5)
    assert contraction_constant(lo, *args) <= contraction_constant(hi, *args)


def test_scalar_benchmark_closed_form(scalar_solution):
    _, u, report = scalar_solution
    assert report.converged
    exact = (np.sin(u.t) - np.cos(u.t)) / 2
    assert np.max(np.abs(u.values - exact)) <= 1e-6


def test_coupled_benchmark_against_ode(coupled_solution):
    _, u, report = coupled_solution
    assert np.max(np.abs(u.values - ode_oracle(u.t))) <= 1e-4
    assert report.observed_ratio <= 1.1 * report.contraction_estimate


def test_initial_guess_does_not_matter():
    p = benchmark(coupled=True)
    tol = 1e-10
    u1, _ = solve(p, 10.0, step=0.02, solve_tol=tol)
    u2, _ = solve(p, 10.0, step=0.02, solve_tol=tol, u0=lambda t: 3 * np.cos(2 * t))
    assert np.max(np.abs(u1.values - u2.values)) <= 10 * tol


def test_mild_identity_holds(coupled_solution):
    p, u, _ = coupled_solution
    res = mild_identity_residual(u, p, [(-5.0, -4.0), (0.0, 1.0), (2.0, 7.0)])
    assert max(res) < 1e-5


def test_saddle_problem_matches_ode():
    g = lambda t, V: np.column_stack((np.sin(t), np.cos(t))) + 0.05 * V
    p = MildProblem(SADDLE, g=g, C=np.eye(2), K=0.05, alpha=0.6, beta=0.8, mu=0.1)
    u, report = solve(p, 5.0, step=0.02)
    # bounded periodic solutions of u' = -0.95 u + sin t and v' = 1.05 v + cos t
    t = u.t
    s1 = (0.95 * np.sin(t) - np.cos(t)) / (0.95**2 + 1)
    s2 = -(1.05 * np.cos(t) - np.sin(t)) / (1.05**2 + 1)
    np.testing.assert_allclose(u.values[:, 0], s1, atol=1e-6)
    np.testing.assert_allclose(u.values[:, 1], s2, atol=1e-6)
    assert report.converged and report.observed_ratio <= 1.1 * report.contraction_estimate


def test_gate_blocks_large_coupling():
    p = MildProblem(SCALAR, g=lambda t, V: np.sin(t)[:, None] + 0.9 * V, C=np.eye(1), K=5.0,
                    alpha=0.6, beta=0.8, mu=0.1)
    with pytest.raises(PreconditionError):
        solve(p, 2.0, step=0.05)


def test_gate_override_warns():
    p = MildProblem(SCALAR, g=lambda t, V: np.sin(t)[:, None] + 0.5 * V, C=np.eye(1), K=1.5,
                    alpha=0.6, beta=0.8, mu=0.1)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u, report = solve(p, 2.0, step=0.05, override_gate=True)
    assert report.contraction_estimate >= GATE
    assert any("contraction" in str(w.message) for w in caught)
    assert report.converged


def test_ap_forcing_gives_ap_solution(scalar_solution):
    p, _, _ = scalar_solution
    u, _ = solve(p, 40.0, step=0.02)
    rep = verify_wpap(u, p, eps=1e-2)
    assert rep.passed and rep.certificate.passed


def test_ergodic_part_of_solution_decays():
    p = MildProblem(SCALAR, g=lambda t, V: (np.sin(t) + np.exp(-np.abs(t)))[:, None] + 0 * V,
                    g_ap=g_sin, alpha=0.6, beta=0.8, mu=0.1, weight=Weight.constant(1.0))
    u, _ = solve(p, 160.0, step=0.05)
    rep = verify_wpap(u, p)
    # the remainder behaves like (1 - exp(-T)) / T in the mean
    np.testing.assert_allclose(rep.deviation.values, 1 / np.asarray(rep.deviation.horizons),
                               rtol=2e-2)
    assert rep.passed and rep.deviation.decays_to_zero


def test_sup_alpha_residuals_shrink(coupled_solution):
    _, _, report = coupled_solution
    r = report.sup_alpha_residuals
    assert all(b < a for a, b in zip(r, r[1:]))
    assert report.a_posteriori_error <= 1e-10
