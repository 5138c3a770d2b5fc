"""Finite-difference heat equation with gradient coefficients.

On ``(0, length)`` with homogeneous Dirichlet data the equation

    d/dt [phi + F(t, b grad phi)] = a(t, x) phi_xx + G(t, c grad phi)

becomes a :class:`wpap.mild.MildProblem` with

* ``A(t) = diag(a(t, x_i)) L_h`` (second differences),
* ``B(t) = diag(b(t, x_i)) D_h`` and ``C(t) = diag(c(t, x_i)) D_h``
  (first differences, one-sided at the two nodes next to the boundary),
* ``F(t, v) = K e(t, x) / (1 + |v|)`` and ``G(t, v) = K h(t, x) / (1 + |v|)``
  node by node.

The gradient coefficients are separable, ``b(t, x) = b_t(t) b_x(x)``.
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PreconditionError
from .evolution import LinearFamily, alpha_matrices, check_exponents
from .mild import MildProblem, OperatorFamily, fit_constants, problem_contraction, solve, verify_wpap
from .pap import is_pap0
from .weights import Weight

GAMMA_SURROGATE = 1393.0 / 985.0  # continued-fraction convergent of sqrt(2)


@dataclass(frozen=True)
class Domain1D:
    length: float = 1.0
    n: int = 31

    def __post_init__(self):
        if self.n < 3 or not self.length > 0:
            raise PreconditionError("Domain1D", "need n >= 3 and positive length")

    @property
    def h(self):
        return self.length / (self.n + 1)

    @property
    def x(self):
        return self.h * np.arange(1, self.n + 1)

    def first_mode(self):
        return np.sin(np.pi * self.x / self.length)

    def first_eigenvalue(self):
        """Eigenvalue of the discrete Laplacian on :meth:`first_mode`."""
        return -4.0 / self.h ** 2 * np.sin(np.pi * self.h / (2 * self.length)) ** 2


def assemble_laplacian(d):
    """Second-difference matrix with the Dirichlet rows eliminated."""
    n = d.n
    L = (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1)
         + np.diag(np.ones(n - 1), -1))
    return L / d.h ** 2


def first_difference(d):
    """Centred differences; one-sided at the first and last node."""
    n, h = d.n, d.h
    D = (np.diag(np.ones(n - 1), 1) - np.diag(np.ones(n - 1), -1)) / (2 * h)
    D[0, :2] = [-1.0 / h, 1.0 / h]
    D[-1, -2:] = [-1.0 / h, 1.0 / h]
    return D


def a_gamma(gamma=GAMMA_SURROGATE):
    """``a(t, x) = 3 + sin(|x| t) + sin(gamma |x| t)``."""
    def a(t, x):
        ax = np.abs(x)
        return 3.0 + np.sin(ax * t) + np.sin(gamma * ax * t)
    return a


@dataclass
class HeatCoefficients:
    """Coefficient fields.

    ``a`` is a callable ``(t, x)`` or a positive constant.  ``b`` and ``c``
    are pairs ``(time factor or None, space factor array-callable)``, or
    ``None`` for zero.  ``e`` and ``h`` are callables ``(t, x)`` returning
    arrays of shape ``(len(t), len(x))``; ``e_ap`` and ``h_ap`` are their
    almost periodic parts.
    """

    a: object = 1.0
    b: object = None
    c: object = None
    e: object = None
    h: object = None
    e_ap: object = None
    h_ap: object = None
    K_nl: float = 0.0
    e_sup: float = 0.0
    h_sup: float = 0.0

    def check_a(self, x, t_probe=np.linspace(-100.0, 100.0, 4001), hoelder_mu=1.0):
        """Lower bound (positivity) and Hoelder constant of ``a`` on a grid."""
        if not callable(self.a):
            if self.a <= 0:
                raise PreconditionError("build_heat_problem", "a must be positive")
            return {"inf_a": float(self.a), "hoelder_L": 0.0}
        vals = self.a(t_probe[:, None], x[None, :])
        inf_a = float(vals.min())
        if inf_a <= 0:
            raise PreconditionError("build_heat_problem",
                                    f"inf a = {inf_a:g} <= 0 on the probe grid")
        dt = np.diff(t_probe)[0]
        L = float(np.max(np.abs(np.diff(vals, axis=0))) / dt ** hoelder_mu)
        return {"inf_a": inf_a, "hoelder_L": L}


def _operator(coef, D, x):
    if coef is None:
        return None
    time_part, space_part = coef
    space = space_part(x) if callable(space_part) else np.broadcast_to(space_part, x.shape)
    return OperatorFamily(np.diag(space) @ D, modulation=time_part)


def _nonlinear(field_fn, K, x):
    if field_fn is None:
        return None

    def F(t, V):
        return K * field_fn(t, x) / (1.0 + np.abs(V))
    return F


def build_heat_problem(d, coeffs, m=2, alpha=0.6, beta=0.8, mu=0.1,
                       fit_window=(0.05, 2.0), s_samples=None, step=0.01):
    """Assemble the discretised problem and its Lipschitz constant.

    The Lipschitz constant of ``F`` in the beta norm is bounded by
    ``max_r |M_r^beta| K sup|e|``; that of ``G`` by ``K sup|h|``; the
    problem's ``K`` is the larger of the two.
    """
    check_exponents(alpha, beta, mu)
    if not alpha > 0.5:
        raise PreconditionError("build_heat_problem", "need alpha > 1/2")
    x = d.x
    a_check = coeffs.check_a(x)
    L = assemble_laplacian(d)
    if callable(coeffs.a):
        a = coeffs.a
        family = LinearFamily.tabulated(lambda t: a(t, x)[:, None] * L,
                                        probe=np.linspace(-20.0, 20.0, 201))
    else:
        family = LinearFamily.constant(float(coeffs.a) * L)
    from .evolution import EvolutionFamily, dichotomy
    ef = EvolutionFamily(family, step=step)
    if s_samples is None:
        s_samples = np.linspace(-10.0, 10.0, 5)
    dd = dichotomy(ef, s_samples=s_samples, fit_window=fit_window, n_tau=20)
    D = first_difference(d)
    B = _operator(coeffs.b, D, x)
    C = _operator(coeffs.c, D, x)
    Mb = alpha_matrices(family(0.0), family.omega, beta)
    beta_scale = float(np.max(np.linalg.norm(Mb, ord=2, axis=(1, 2))))
    K_f = beta_scale * coeffs.K_nl * coeffs.e_sup if coeffs.e is not None else 0.0
    K_g = coeffs.K_nl * coeffs.h_sup if coeffs.h is not None else 0.0
    p = MildProblem(family,
                    f=_nonlinear(coeffs.e, coeffs.K_nl, x),
                    g=_nonlinear(coeffs.h, coeffs.K_nl, x),
                    B=B, C=C, K=max(K_f, K_g), alpha=alpha, beta=beta, mu=mu,
                    weight=Weight.polynomial(m),
                    f_ap=_nonlinear(coeffs.e_ap, coeffs.K_nl, x) if coeffs.e_ap else None,
                    g_ap=_nonlinear(coeffs.h_ap, coeffs.K_nl, x) if coeffs.h_ap else None,
                    ef=ef, dd=dd)
    p.fit_options = {"fit_window": fit_window, "s_samples": s_samples[::2],
                     "taus": np.concatenate((np.geomspace(1e-3, fit_window[0], 6),
                                             np.linspace(fit_window[0], fit_window[1], 12)))}
    p.heat_info = {"a_check": a_check, "beta_scale": beta_scale, "K_f": K_f,
                   "K_g": K_g}
    return p


# -- benchmark and demo -----------------------------------------------------

def single_mode_problem(d, amplitude=1.0, alpha=0.6, beta=0.8, mu=0.1):
    """``a = 1``, no gradient terms, ``G(t, .) = sin(t) v_1``."""
    mode = d.first_mode()

    def g(t, V):
        return amplitude * np.sin(t)[:, None] * mode[None, :]
    family = LinearFamily.constant(assemble_laplacian(d))
    p = MildProblem(family, g=g, alpha=alpha, beta=beta, mu=mu,
                    dichotomy_options={"s_samples": [0.0], "fit_window": (0.05, 1.0)})
    return p


def single_mode_oracle(t, d, eigenvalue=None, amplitude=1.0):
    """``Im(exp(i t) / (i - lambda)) v_1``; the discrete eigenvalue by default."""
    lam = d.first_eigenvalue() if eigenvalue is None else eigenvalue
    amp = amplitude * np.imag(np.exp(1j * np.asarray(t)) / (1j - lam))
    return amp[:, None] * d.first_mode()[None, :]


def single_mode_error(n, T_out=5.0, step=0.05, eigenvalue=None, length=1.0):
    """Sup-norm gap between the solver and the single-mode oracle."""
    d = Domain1D(length, n)
    p = single_mode_problem(d)
    u, report = solve(p, T_out, step=step, solve_tol=1e-12,
                      fit_options={"fit_window": (0.05, 1.0), "s_samples": [0.0]})
    exact = single_mode_oracle(u.t, d, eigenvalue)
    if eigenvalue is not None:
        # the continuous problem's mode, sampled at the nodes
        exact = np.imag(np.exp(1j * u.t) / (1j - eigenvalue))[:, None] * \
            np.sin(np.pi * d.x / length)[None, :]
    return float(np.max(np.abs(u.values - exact))), u, report


@dataclass
class HeatDemoConfig:
    n: int = 15
    length: float = 1.0
    m: int = 2
    gamma: float = GAMMA_SURROGATE
    K_nl: float = 1e-4
    alpha: float = 0.6
    beta: float = 0.8
    mu: float = 0.1
    T_out: float = 40.0
    step: float = 0.05
    solve_tol: float = 1e-10
    forcing: str = "wpap"  # "wpap", "zero" or "single-mode"
    horizons: list = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    override_gate: bool = False


def demo_coefficients(cfg):
    """Coefficients of the shipped demo.

    ``e = (sin t + exp(-|t|)) sin(pi x)`` and
    ``h = (cos(sqrt2 t) + 1/(1+t^2)) sin(pi x)``; ``b = c = 1 + 0.5 cos t``.
    """
    L = cfg.length

    def mode(x):
        return np.sin(np.pi * np.asarray(x) / L)

    def e(t, x):
        return (np.sin(t) + np.exp(-np.abs(t)))[:, None] * mode(x)[None, :]

    def e_ap(t, x):
        return np.sin(t)[:, None] * mode(x)[None, :]

    def h(t, x):
        return (np.cos(np.sqrt(2) * t) + 1.0 / (1.0 + t * t))[:, None] * mode(x)[None, :]

    def h_ap(t, x):
        return np.cos(np.sqrt(2) * t)[:, None] * mode(x)[None, :]

    def bt(t):
        return 1.0 + 0.5 * np.cos(t)
    if cfg.forcing == "zero":
        return HeatCoefficients(a=a_gamma(cfg.gamma), b=(bt, 1.0), c=(bt, 1.0),
                                K_nl=cfg.K_nl)
    return HeatCoefficients(a=a_gamma(cfg.gamma), b=(bt, 1.0), c=(bt, 1.0),
                            e=e, h=h, e_ap=e_ap, h_ap=h_ap, K_nl=cfg.K_nl,
                            e_sup=2.0, h_sup=2.0)


@dataclass
class HeatDemoResult:
    config: dict
    solution: object
    report: object
    dichotomy: dict
    wpap: object
    deviation_rho0: object = None
    benchmark: dict = None


def run_demo(cfg, out_dir=None):
    """Solve the demo problem and check its structure under ``rho_m``.

    ``forcing="single-mode"`` runs the constant-coefficient benchmark
    instead and reports its error against the single-mode oracle.
    """
    if cfg.forcing == "single-mode":
        err, u, report = single_mode_error(cfg.n, T_out=min(cfg.T_out, 10.0),
                                           step=cfg.step)
        res = HeatDemoResult(asdict(cfg), u, report, {}, None,
                             benchmark={"sup_error": err})
    else:
        d = Domain1D(cfg.length, cfg.n)
        p = build_heat_problem(d, demo_coefficients(cfg), cfg.m, cfg.alpha,
                               cfg.beta, cfg.mu)
        u, report = solve(p, cfg.T_out, step=cfg.step, solve_tol=cfg.solve_tol,
                          override_gate=cfg.override_gate,
                          fit_options=p.fit_options)
        dd = p.dd
        dich = {"delta": dd.delta, "N": dd.N, "checks": {
            k: v for k, v in dd.checks.items() if not isinstance(v, dict)}}
        dich.update(p.heat_info)
        if cfg.forcing == "zero":
            wp = verify_wpap(u, p)
            dev0 = None
        else:
            wp = verify_wpap(u, p, weight=p.weight, horizons=cfg.horizons,
                             solve_kwargs={"solve_tol": cfg.solve_tol,
                                           "override_gate": cfg.override_gate,
                                           "fit_options": p.fit_options})
            remainder = u - wp.ap_solution
            dev0 = is_pap0(remainder, Weight.polynomial(0), cfg.horizons)
        res = HeatDemoResult(asdict(cfg), u, report, dich, wp, dev0)
    if out_dir is not None:
        write_demo(res, out_dir)
    return res


def write_demo(res, out_dir):
    """CSV of the solution field and deviation curves, JSON report."""
    from .cli import write_csv, to_jsonable
    os.makedirs(out_dir, exist_ok=True)
    u = res.solution
    vals = u.values.reshape(len(u.t), -1)
    n = vals.shape[1]
    x = Domain1D(res.config["length"], n).x
    rows = [(t, xi, v) for t, row in zip(u.t, vals) for xi, v in zip(x, row)]
    files = [write_csv(os.path.join(out_dir, "solution.csv"), ["t", "x", "value"], rows)]
    payload = {"config": res.config, "report": res.report, "dichotomy": res.dichotomy,
               "benchmark": res.benchmark}
    if res.wpap is not None:
        payload["wpap"] = {"passed": res.wpap.passed,
                           "deviation": res.wpap.deviation,
                           "certificate": res.wpap.certificate}
        if res.wpap.deviation is not None:
            dev = res.wpap.deviation
            files.append(write_csv(os.path.join(out_dir, "deviation.csv"),
                                   ["T", "value"], zip(dev.horizons, dev.values)))
    if res.deviation_rho0 is not None:
        payload["deviation_rho0"] = res.deviation_rho0
    path = os.path.join(out_dir, "report.json")
    with open(path, "w") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
    files.append(path)
    return files
