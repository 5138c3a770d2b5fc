"""End-to-end acceptance criteria, each at its stated tolerance and time budget.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import filecmp
import json
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from wpap import (APSignal, EvolutionFamily, Forcing, LinearFamily, MildProblem, SampledPath,
                  Weight, WpapDecomposition, compose_and_test, convolve_and_test, dichotomy,
                  equivalence_transfers_pap0, ergodic_mass, fit_estimate, is_pap0, solve,
                  weights_equivalent)
from wpap.cli import main
from wpap.heat import HeatDemoConfig, run_demo, single_mode_error

CONFIGS = Path(__file__).resolve().parents[1] / "demos" / "configs"
ONE = Weight.constant(1.0)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s > {self.seconds}s"


def test_criterion_1_weight_algebra():
    with Budget(1.0):
        for T in (0.5, 3.0, 1e3):
            assert abs(ergodic_mass(ONE, T).value - 2 * T) <= 1e-12 * max(1.0, T)
        assert abs(ergodic_mass(Weight.polynomial(1), 3.0).value - 24.0) <= 1e-9
        corpus = [Weight.polynomial(m) for m in range(4)] + [
            Weight.constant(2.0), Weight.expression(lambda t: 2 + t**2)]
        n = len(corpus)
        eq = np.zeros((n, n), dtype=bool)
        for i in range(n):
            eq[i, i] = weights_equivalent(corpus[i], corpus[i], [500.0, 1000.0, 2000.0]).equivalent
        for i, j in combinations(range(n), 2):
            eq[i, j] = weights_equivalent(corpus[i], corpus[j], [500.0, 1000.0, 2000.0]).equivalent
            eq[j, i] = weights_equivalent(corpus[j], corpus[i], [500.0, 1000.0, 2000.0]).equivalent
    assert eq.diagonal().all()
    assert (eq == eq.T).all()
    assert all(eq[i, k] for i in range(n) for j in range(n) for k in range(n)
               if eq[i, j] and eq[j, k])
    # the classes: {rho0, 2}, {rho1, 2 + t^2}, {rho2}, {rho3}
    assert eq[0, 4] and eq[1, 5] and not eq[0, 1] and not eq[2, 3]


def test_criterion_2_pap0_decisions():
    with Budget(10.0):
        dec = is_pap0(lambda t: np.exp(-np.abs(t)), ONE)
        sin = is_pap0(np.sin, ONE)
        corpus = {"exp": lambda t: np.exp(-np.abs(t)), "sin": np.sin,
                  "lorentz": lambda t: 1 / (1 + t**2),
                  "two_tone": lambda t: np.sin(t) + np.sin(np.sqrt(2) * t),
                  "gauss": lambda t: np.exp(-t**2)}
        pairs = [(ONE, Weight.constant(2.0)),
                 (Weight.polynomial(1), Weight.expression(lambda t: 2 + t**2)),
                 (Weight.polynomial(2), Weight.expression(lambda t: 5 * (1 + t**2) ** 2))]
        reports = [equivalence_transfers_pap0(a, b, corpus) for a, b in pairs]
    assert dec.decays_to_zero and not sin.decays_to_zero
    k = dec.horizons.index(160.0)
    assert abs(dec.values[k] - (1 - np.exp(-160.0)) / 160.0) <= 1e-3
    assert abs(sin.values[k] - 2 / np.pi) <= 1e-3
    assert all(r.agree for r in reports)


def test_criterion_3_closure():
    kern, support = (lambda s: np.ones_like(s)), (0.0, 1.0)
    conv_ok = [lambda t: np.exp(-np.abs(t)), lambda t: 1 / (1 + t**2), lambda t: np.exp(-t**2),
               lambda t: np.exp(-np.abs(t)) * np.sin(3 * t), lambda t: 1 / np.cosh(t),
               lambda t: np.maximum(0.0, 1 - np.abs(t - 5))]
    conv_bad = [np.sin, lambda t: 1 + 0 * t]
    erg = [lambda t: np.exp(-np.abs(t)), lambda t: 1 / (1 + t**2), lambda t: np.exp(-t**2)]
    comp_ok = [(Forcing(lambda t, u: np.sin(u), lipschitz=1.0), np.sin, erg[0]),
               (Forcing(lambda t, u: np.sin(u), lipschitz=1.0),
                lambda t: np.sin(t) + np.sin(np.sqrt(2) * t), erg[1]),
               (Forcing(lambda t, u: u**2, lipschitz=6.0), np.sin, erg[0]),
               (Forcing(lambda t, u: u**2, lipschitz=6.0), np.cos, erg[2]),
               (Forcing(lambda t, u: np.cos(t) * u, lipschitz=1.0), np.sin, erg[0]),
               (Forcing(lambda t, u: np.tanh(u), ergodic=lambda t, u: np.exp(-np.abs(t)),
                        lipschitz=1.0), np.cos, erg[1])]
    comp_bad = [(Forcing(lambda t, u: np.sin(u), lipschitz=1.0), np.sin, lambda t: 0.5 + 0 * t),
                (Forcing(lambda t, u: u, lipschitz=1.0), np.cos, lambda t: np.sin(2 * t))]
    with Budget(30.0):
        conv = [convolve_and_test(SampledPath.from_function(f, 360.0, 0.02), kern, support,
                                  ONE).decays_to_zero for f in conv_ok + conv_bad]
        comp = [compose_and_test(F, WpapDecomposition(ap, e, ONE)).decays_to_zero
                for F, ap, e in comp_ok + comp_bad]
    assert conv == [True] * len(conv_ok) + [False] * len(conv_bad)
    assert comp == [True] * len(comp_ok) + [False] * len(comp_bad)


def _rates_hold(ef, dd):
    ok = {}
    for target, factor in (("eq1.1", 0.5), ("eq2.1", 1.0), ("beta1", 1.0), ("beta2", 0.25)):
        fit = fit_estimate(ef, dd, target, 0.6, 0.8, 0.1)
        # within a 5% rate tolerance of the required exponential rate
        ok[target] = fit.rate_ok and fit.decay_rate >= 0.95 * factor * dd.delta
    return ok


def test_criterion_4_dichotomy_estimates():
    rng = np.random.default_rng(4)
    with Budget(60.0):
        saddle = EvolutionFamily(LinearFamily.constant(np.diag([-1.0, 1.0])), tol=1e-10)
        d = APSignal.sin(1.0) + APSignal.sin(np.sqrt(2.0))
        modulated = EvolutionFamily(LinearFamily.modulated([[-1.0]], d, offset=3.0), tol=1e-10)
        tabulated = EvolutionFamily(LinearFamily.tabulated(
            lambda t: np.array([[-3 - np.sin(t) - np.sin(np.sqrt(2) * t), 0.2], [0.0, -2.0]])),
            tol=1e-10)
        results = {}
        for name, ef in (("saddle", saddle), ("modulated", modulated)):
            results[name] = _rates_hold(ef, dichotomy(ef))
        defects = []
        for ef in (saddle, modulated, tabulated):
            for _ in range(10):
                r, a, b = rng.uniform(-20, 20), rng.uniform(0, 5), rng.uniform(0, 5)
                defects.append(ef.cocycle_defect(r + a + b, r + a, r))
    for name, ok in results.items():
        assert all(ok.values()), (name, ok)
    assert max(defects) <= 1e-8


def _ode_oracle(t_eval, coef):
    t0 = t_eval[0] - 40.0
    sol = solve_ivp(lambda t, u: -u + np.sin(t) + coef * u, (t0, t_eval[-1]), [0.0],
                    t_eval=np.concatenate(([t0], t_eval)), rtol=1e-12, atol=1e-14,
                    method="DOP853")
    return sol.y[0, 1:]


def test_criterion_5_fixed_point():
    fam = LinearFamily.constant([[-1.0]])
    solve_tol = 1e-10
    with Budget(120.0):
        p0 = MildProblem(fam, g=lambda t, V: np.sin(t)[:, None] + 0 * V, C=np.eye(1),
                         alpha=0.6, beta=0.8, mu=0.1)
        u0, r0 = solve(p0, 10.0, step=0.02, solve_tol=solve_tol)
        p1 = MildProblem(fam, g=lambda t, V: np.sin(t)[:, None] + 0.05 * V, C=np.eye(1),
                         K=0.05, alpha=0.6, beta=0.8, mu=0.1)
        u1, r1 = solve(p1, 10.0, step=0.02, solve_tol=solve_tol)
        u2, _ = solve(p1, 10.0, step=0.02, solve_tol=solve_tol,
                      u0=lambda t: 2 * np.cos(3 * t) - 1)
        oracle = _ode_oracle(u1.t, 0.05)
    assert r0.converged and r1.converged
    assert np.max(np.abs(u0.values - (np.sin(u0.t) - np.cos(u0.t)) / 2)) <= 1e-6
    assert np.max(np.abs(u1.values - oracle)) <= 1e-4
    assert r1.observed_ratio <= 1.1 * r1.contraction_estimate
    assert np.max(np.abs(u1.values - u2.values)) <= 10 * solve_tol


def test_criterion_6_heat_demo():
    with Budget(600.0):
        err31_fd, _, _ = single_mode_error(31)
        err31, _, _ = single_mode_error(31, eigenvalue=-np.pi**2)
        err63, _, _ = single_mode_error(63, eigenvalue=-np.pi**2)
        res = run_demo(HeatDemoConfig())
    assert err31_fd <= 1e-4 and err31 <= 1e-4
    assert 3.5 <= err31 / err63 <= 4.5
    assert res.report.converged
    dev = res.wpap.deviation
    assert dev.decays_to_zero and max(dev.ratios) <= 0.75


RUNS = [("classify-weight", "classify_weight.ini"), ("test-pap0", "test_pap0.ini"),
        ("verify-dichotomy", "dichotomy.ini"), ("fit-estimates", "dichotomy.ini"),
        ("solve-mild", "solve_mild.ini"), ("heat-demo", "heat_demo.ini")]


def test_criterion_7_determinism(tmp_path):
    for sub, cfg in RUNS:
        outs = [tmp_path / f"{sub}-{k}" for k in range(2)]
        for out in outs:
            assert main([sub, "--config", str(CONFIGS / cfg), "--out", str(out)]) == 0
        a, b = (json.loads((o / "manifest.json").read_text()) for o in outs)
        files = [f["path"] for f in a["files"]]
        assert files and files == [f["path"] for f in b["files"]]
        _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], files, shallow=False)
        assert not mismatch and not errors, (sub, mismatch, errors)
        for m in (a, b):
            m.pop("timing_seconds")
        assert a == b
