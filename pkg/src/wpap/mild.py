"""Integral operators, the contraction map and the fixed-point solver.

The mild solution of

    d/dt [u + f(t, B(t) u)] = A(t) u + g(t, C(t) u)

is the fixed point of

    M u = -f(., B u) - G1 u + G2 u + G3 u - G4 u,

where G1, G2 are the stable and unstable Green convolutions of
``A(s) f(s, B(s) u(s))`` and G3, G4 those of ``g(s, C(s) u(s))``.  Writing
``phi = g - A f`` the map is ``-f + int G(t, s) phi(s) ds`` with the
dichotomy Green kernel ``G``.

Convolutions run on a uniform grid by the recursion

    y(t_{i+1}) = U(t_{i+1}, t_i) P y(t_i) + int_{t_i}^{t_{i+1}} U(t_{i+1}, s) P psi(s) ds,

and its backward mirror for the unstable part.  On each panel ``psi`` is
replaced by the cubic through four neighbouring grid values and the panel
integral is done exactly (constant generators), by Gauss-Legendre on the
eigen-decomposition (scalar-modulated generators) or with ``A`` frozen at
the panel midpoint (tabulated generators).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline

from .ap import translation_certificate
from .errors import ConvergenceError, PreconditionError
from .evolution import (EvolutionFamily, R_GRID, alpha_matrices,
                        alpha_norms_of_samples, check_exponents, dichotomy,
                        embedding_constant, fit_estimate, operator_bound)
from .pap import DEFAULT_DECAY, DEFAULT_TOL, SampledPath, is_pap0
from .quadrature import gauss_legendre, panel_nodes

GATE = 0.95


class OperatorFamily:
    """Bounded operators ``t -> m(t) M`` with an optional scalar modulation."""

    def __init__(self, matrix, modulation=None, name=""):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.modulation = modulation
        self.name = name

    @classmethod
    def coerce(cls, op, dim):
        if op is None:
            return cls(np.zeros((dim, dim)), name="zero")
        if isinstance(op, OperatorFamily):
            return op
        return cls(op)

    def __call__(self, t):
        if self.modulation is None:
            return self.matrix
        return float(np.real(self.modulation(t))) * self.matrix

    def apply(self, t, U):
        """Rows ``B(t_i) u_i`` for samples ``U`` of shape ``(n, dim)``."""
        out = U @ self.matrix.T
        if self.modulation is not None:
            out = out * np.real(np.asarray(self.modulation(t)))[:, None]
        return out

    def sup_scale(self, probe=np.linspace(-200.0, 200.0, 40001)):
        if self.modulation is None:
            return 1.0
        return float(np.max(np.abs(np.real(self.modulation(probe)))))

    def alpha_bound(self, M):
        """Bound of ``|B(t) x|`` against ``|x|_alpha``, uniformly in t."""
        if not np.any(self.matrix):
            return 0.0
        inv = np.linalg.inv(M)
        norms = np.linalg.norm(self.matrix @ inv, ord=2, axis=(1, 2))
        return float(np.min(norms)) * self.sup_scale()


@dataclass
class MildProblem:
    """Data of the nonautonomous equation and its exponents.

    ``f`` and ``g`` map ``(t, V)`` with ``t`` of shape ``(n,)`` and ``V`` of
    shape ``(n, dim)`` to ``(n, dim)`` arrays; ``None`` means zero.  ``f``
    must be ``K``-Lipschitz into the beta space and ``g`` into the ambient
    space.  ``f_ap`` and ``g_ap`` are the almost periodic parts of the
    forcings, used to isolate the ergodic part of the solution.
    """

    family: object
    f: object = None
    g: object = None
    B: object = None
    C: object = None
    K: float = 0.0
    alpha: float = 0.5
    beta: float = 0.75
    mu: float = 0.0
    weight: object = None
    f_ap: object = None
    g_ap: object = None
    ef: object = None
    dd: object = None
    dichotomy_options: dict = field(default_factory=dict)

    def __post_init__(self):
        check_exponents(self.alpha, self.beta, self.mu)
        if not self.K >= 0:
            raise PreconditionError("MildProblem", "K must be non-negative")
        dim = self.family.dim
        self.B = OperatorFamily.coerce(self.B, dim)
        self.C = OperatorFamily.coerce(self.C, dim)
        if self.ef is None:
            self.ef = EvolutionFamily(self.family)
        if self.dd is None:
            self.dd = dichotomy(self.ef, **self.dichotomy_options)

    @property
    def dim(self):
        return self.family.dim

    def forcing_f(self, t, U):
        if self.f is None:
            return np.zeros_like(U)
        return np.asarray(self.f(t, self.B.apply(t, U)), dtype=float).reshape(U.shape)

    def forcing_g(self, t, U):
        if self.g is None:
            return np.zeros_like(U)
        return np.asarray(self.g(t, self.C.apply(t, U)), dtype=float).reshape(U.shape)

    def apply_A(self, t, V):
        fam = self.family
        if fam.form == "constant":
            return V @ fam.A.T
        if fam.form == "modulated":
            return (V @ fam.A.T) * fam.modulation(t)[:, None]
        return np.stack([fam(ti) @ v for ti, v in zip(t, V)])

    def ap_only(self):
        """The same problem driven by the almost periodic forcing parts."""
        return MildProblem(self.family, self.f_ap, self.g_ap, self.B, self.C,
                           self.K, self.alpha, self.beta, self.mu, self.weight,
                           self.f_ap, self.g_ap, self.ef, self.dd)


# -- convolution weights -----------------------------------------------------

def _stencils(n):
    """First node of the four-point stencil for each panel."""
    return np.clip(np.arange(n - 1) - 1, 0, n - 4)


def _lagrange_coeffs(offsets):
    """Monomial coefficients (row k: basis k) of the Lagrange basis."""
    V = np.vander(offsets, 4, increasing=True)
    return np.linalg.inv(V).T


def _poly_exp_integrals(M, h):
    """``int_0^h exp((h - s) M) s**m ds`` for ``m = 0..3`` and ``exp(h M)``."""
    n = len(M)
    big = np.zeros((5 * n, 5 * n))
    big[:n, :n] = M
    for j in range(4):
        big[j * n:(j + 1) * n, (j + 1) * n:(j + 2) * n] = np.eye(n)
    E = linalg.expm(h * big)
    ints = [E[:n, (m + 1) * n:(m + 2) * n] * math.factorial(m) for m in range(4)]
    return E[:n, :n], np.stack(ints)


class Convolver:
    """Stable and unstable Green convolutions on a fixed uniform grid."""

    def __init__(self, problem, t):
        self.p = problem
        self.t = np.asarray(t, dtype=float)
        n = self.t.size
        if n < 4:
            raise PreconditionError("Convolver", "grid needs at least 4 points")
        self.h = float(self.t[1] - self.t[0])
        self.j0 = _stencils(n)
        i = np.arange(n - 1)
        self.offsets = (self.j0[:, None] + np.arange(4)[None, :] - i[:, None]) * self.h
        fam = problem.family
        self.has_q = problem.dd.has_unstable
        if fam.form == "constant":
            self._build_constant()
        elif fam.form == "modulated":
            self._build_modulated()
        else:
            if self.has_q:
                raise PreconditionError("Convolver",
                                        "tabulated families must be stable")
            self._build_tabulated()

    # each builder fills Phi_P (n-1, d, d) or a shared matrix, W_P (n-1 or 3, 4, d, d)
    def _kinds(self):
        n = self.t.size
        kind = np.ones(n - 1, dtype=int)
        kind[0], kind[-1] = 0, 2
        return kind

    def _build_constant(self):
        dd, A, h = self.p.dd, self.p.family.A, self.h
        kind = self._kinds()
        reps = [0, 1, len(kind) - 1]
        Phi, ints = _poly_exp_integrals(A @ dd.P, h)
        self.Phi_P = Phi @ dd.P
        self.W_P = np.stack([np.einsum("km,mij->kij", _lagrange_coeffs(self.offsets[r]),
                                       ints) @ dd.P for r in reps])
        self.kind = kind
        if self.has_q:
            PhiQ, intsQ = _poly_exp_integrals(-A @ dd.Q, h)
            self.Phi_Q = PhiQ @ dd.Q
            # backward panel variable s' = t_{i+1} - s
            self.W_Q = np.stack([np.einsum("km,mij->kij",
                                           _lagrange_coeffs(h - self.offsets[r]),
                                           intsQ) @ dd.Q for r in reps])

    def _build_modulated(self):
        fam, dd, h = self.p.family, self.p.dd, self.h
        lam, V = np.linalg.eig(fam.A)
        if np.linalg.cond(V) > 1e10:
            raise PreconditionError("Convolver",
                                    "modulated generator must be diagonalizable")
        Vi = np.linalg.inv(V)
        stable = (lam.real < 0).astype(float)
        x, w = gauss_legendre(8)
        sig = 0.5 * h * (x + 1.0)
        wq = 0.5 * h * w
        t0, t1 = self.t[:-1], self.t[1:]
        nodes = t0[:, None] + sig[None, :]
        # D[i, q] = int_{nodes}^{t_{i+1}} d
        D = _local_integrals(fam, np.broadcast_to(t1[:, None], nodes.shape), nodes)
        Dfull = _local_integrals(fam, t1, t0)
        # Lagrange basis values at the quadrature nodes, (panel, node, basis)
        L = np.stack([(np.vander(sig, 4, increasing=True) @ _lagrange_coeffs(o).T)
                      for o in self.offsets])

        def assemble(diag):
            # diag: (..., r) eigen-space factors -> real matrices
            out = np.einsum("ir,...r,rj->...ij", V, diag, Vi)
            return out.real

        expP = np.exp(D[..., None] * lam) * stable              # (n-1, q, r)
        self.Phi_P = assemble(np.exp(Dfull[:, None] * lam) * stable)
        coefP = np.einsum("q,iqk,iqr->ikr", wq, L, expP)
        self.W_P = assemble(coefP)
        self.kind = None
        if self.has_q:
            unstable = 1.0 - stable
            # U~_Q(t_i, s) = exp(-(int_{t_i}^{s} d) A) on the unstable part
            Dq = Dfull[:, None] - D                              # int_{t_i}^{node}
            expQ = np.exp(-Dq[..., None] * lam) * unstable
            self.Phi_Q = assemble(np.exp(-Dfull[:, None] * lam) * unstable)
            coefQ = np.einsum("q,iqk,iqr->ikr", wq, L, expQ)
            self.W_Q = assemble(coefQ)

    def _build_tabulated(self):
        fam, h = self.p.family, self.h
        npan = self.t.size - 1
        d = fam.dim
        self.Phi_P = np.empty((npan, d, d))
        self.W_P = np.empty((npan, 4, d, d))
        for i in range(npan):
            Phi, ints = _poly_exp_integrals(fam(self.t[i] + 0.5 * h), h)
            self.Phi_P[i] = Phi
            self.W_P[i] = np.einsum("km,mij->kij", _lagrange_coeffs(self.offsets[i]), ints)
        self.kind = None

    def _panel_sources(self, W, psi):
        idx = self.j0[:, None] + np.arange(4)[None, :]
        vals = psi[idx]                                          # (n-1, 4, d)
        if self.kind is not None:
            return np.einsum("ikab,ikb->ia", W[self.kind], vals)
        return np.einsum("ikab,ikb->ia", W, vals)

    def stable(self, psi):
        """``int_{t_0}^{t} U(t, s) P psi(s) ds`` at every grid time."""
        psi = np.asarray(psi, dtype=float).reshape(self.t.size, -1)
        src = self._panel_sources(self.W_P, psi)
        y = np.zeros_like(psi)
        Phi = self.Phi_P
        if Phi.ndim == 2:
            for i in range(len(src)):
                y[i + 1] = Phi @ y[i] + src[i]
        else:
            for i in range(len(src)):
                y[i + 1] = Phi[i] @ y[i] + src[i]
        return y

    def unstable(self, psi):
        """``int_t^{t_end} U~_Q(t, s) Q psi(s) ds`` at every grid time."""
        psi = np.asarray(psi, dtype=float).reshape(self.t.size, -1)
        y = np.zeros_like(psi)
        if not self.has_q:
            return y
        src = self._panel_sources(self.W_Q, psi)
        Phi = self.Phi_Q
        for i in range(len(src) - 1, -1, -1):
            P_i = Phi if Phi.ndim == 2 else Phi[i]
            y[i] = P_i @ y[i + 1] + src[i]
        return y


def _local_integrals(fam, t, s):
    """``int_s^t d`` for short intervals (8-point Gauss-Legendre)."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    x, w = gauss_legendre(8)
    mid, half = 0.5 * (t + s), 0.5 * (t - s)
    pts = mid[..., None] + half[..., None] * x
    return half * (fam.modulation(pts) @ w)


# -- the four operators and the map ------------------------------------------

@dataclass
class SolverGrid:
    """Uniform grid covering ``[-T_out - pad, T_out + pad_right]``."""

    T_out: float
    step: float
    pad: float
    pad_right: float

    @classmethod
    def for_problem(cls, p, T_out, step, pad=None):
        pad = 40.0 / p.dd.delta if pad is None else float(pad)
        pad_right = pad if p.dd.has_unstable else 0.0
        return cls(float(T_out), float(step), pad, pad_right)

    def times(self):
        n_left = int(math.ceil((self.T_out + self.pad) / self.step))
        n_right = int(math.ceil((self.T_out + self.pad_right) / self.step))
        return self.step * np.arange(-n_left, n_right + 1)

    def interior(self, t):
        return np.abs(t) <= self.T_out + 1e-9 * self.step


def _truncation_check(p, grid, quad_tol):
    # tail of the stable integral beyond the pad, per unit forcing
    tail = p.dd.N * math.exp(-p.dd.delta * grid.pad) / p.dd.delta
    if tail > quad_tol:
        raise PreconditionError("gamma", f"truncation tail {tail:.2e} exceeds "
                                         f"quad_tol {quad_tol:.2e}")
    return tail


class MildOperator:
    """Gamma operators and the map on one grid."""

    def __init__(self, p, grid, quad_tol=1e-10, t=None):
        self.p = p
        self.grid = grid
        self.t = grid.times() if t is None else np.asarray(t, dtype=float)
        self.tail_bound = _truncation_check(p, grid, quad_tol)
        self.conv = Convolver(p, self.t)
        fam = p.family
        self.M_alpha = alpha_matrices(fam(0.0), fam.omega, p.alpha)

    def _u(self, u):
        u = u.values if isinstance(u, SampledPath) else np.asarray(u, dtype=float)
        return u.reshape(self.t.size, -1)

    def f_terms(self, u):
        U = self._u(u)
        fv = self.p.forcing_f(self.t, U)
        return fv, self.p.apply_A(self.t, fv)

    def gamma1(self, u):
        return self.conv.stable(self.f_terms(u)[1])

    def gamma2(self, u):
        return self.conv.unstable(self.f_terms(u)[1])

    def gamma3(self, u):
        return self.conv.stable(self.p.forcing_g(self.t, self._u(u)))

    def gamma4(self, u):
        return self.conv.unstable(self.p.forcing_g(self.t, self._u(u)))

    def apply(self, u):
        """``M u`` on the whole grid."""
        U = self._u(u)
        fv, Af = self.f_terms(U)
        phi = self.p.forcing_g(self.t, U) - Af
        return -fv + self.conv.stable(phi) - self.conv.unstable(phi)

    def alpha_sup(self, V):
        return float(np.max(alpha_norms_of_samples(self.M_alpha, self._u(V))))


def _single_eval(op, which, u, t):
    vals = getattr(op, which)(u)
    if t is None:
        return vals
    return np.array([np.interp(t, op.t, vals[:, c]) for c in range(vals.shape[1])])


def _operator_for(u, p, quad_tol=1e-10):
    """Operator on the grid of ``u``; its ends stand in for +-infinity."""
    if not isinstance(u, SampledPath):
        raise PreconditionError("gamma", "need a SampledPath")
    grid = SolverGrid(T_out=0.0, step=u.step, pad=-u.t[0],
                      pad_right=u.t[-1] if p.dd.has_unstable else 0.0)
    return MildOperator(p, grid, quad_tol, t=u.t)


def gamma1(u, p, t=None, quad_tol=1e-10):
    """``int_{-inf}^t U(t,s) P A(s) f(s, B(s) u(s)) ds`` on ``u``'s grid.

    The grid's left end acts as ``-inf``; it must reach far enough back for
    the dichotomy tail ``N exp(-delta S) / delta`` to fall below
    ``quad_tol``.  With ``t`` given the value there is interpolated.
    """
    return _single_eval(_operator_for(u, p, quad_tol=quad_tol), "gamma1", u, t)


def gamma2(u, p, t=None, quad_tol=1e-10):
    """``int_t^{inf} U~_Q(t,s) Q A(s) f(s, B(s) u(s)) ds``."""
    return _single_eval(_operator_for(u, p, quad_tol=quad_tol), "gamma2", u, t)


def gamma3(u, p, t=None, quad_tol=1e-10):
    """``int_{-inf}^t U(t,s) P g(s, C(s) u(s)) ds``."""
    return _single_eval(_operator_for(u, p, quad_tol=quad_tol), "gamma3", u, t)


def gamma4(u, p, t=None, quad_tol=1e-10):
    """``int_t^{inf} U~_Q(t,s) Q g(s, C(s) u(s)) ds``."""
    return _single_eval(_operator_for(u, p, quad_tol=quad_tol), "gamma4", u, t)


def map_M(u, p, quad_tol=1e-10):
    """``-f - G1 u + G2 u + G3 u - G4 u`` as a path on ``u``'s grid."""
    op = _operator_for(u, p, quad_tol=quad_tol)
    return u.with_values(op.apply(u).reshape(u.values.shape))


# -- contraction constant ------------------------------------------------------

@dataclass
class FittedConstants:
    c_alpha: float
    m_alpha: float
    n_alpha_mu: float
    m_alpha_beta: float
    k_alpha: float
    delta: float
    varpi: float
    fits: dict = field(default_factory=dict)
    norm_discrepancy: float = 1.0


def frozen_norm_discrepancy(p, t_samples=None):
    """Equivalence constant between the time-t and the frozen alpha norms.

    Returns the largest ``max(|x|_{alpha,t} / |x|_{alpha,0}, |x|_{alpha,0} /
    |x|_{alpha,t})`` bound over the sampled times; 1 for constant families.
    """
    fam = p.family
    if fam.form == "constant":
        return 1.0
    if t_samples is None:
        t_samples = np.linspace(-20.0, 20.0, 9)
    M0 = alpha_matrices(fam(0.0), fam.omega, p.alpha)
    eye = np.eye(fam.dim)
    worst = 1.0
    for t in t_samples:
        Mt = alpha_matrices(fam(t), fam.omega, p.alpha)
        worst = max(worst, operator_bound(Mt, eye, M0), operator_bound(M0, eye, Mt))
    return float(worst)


def contraction_constant(K, alpha, delta, c_alpha, m_alpha, n_alpha_mu,
                         m_alpha_beta, k_alpha, varpi):
    """A priori Lipschitz constant of the map in the sup-alpha norm.

    ``K varpi [k + 2^(1-a) delta^(a-1) Gamma(1-a) (n + c)
    + (m_ab + m_a) / delta]``.
    """
    if not 0 < alpha < 1:
        raise PreconditionError("contraction_constant", "alpha must lie in (0, 1)")
    if delta <= 0:
        raise PreconditionError("contraction_constant", "delta must be positive")
    singular = 2.0 ** (1 - alpha) * delta ** (alpha - 1) * math.gamma(1 - alpha)
    return float(K * varpi * (k_alpha + singular * (n_alpha_mu + c_alpha)
                              + (m_alpha_beta + m_alpha) / delta))


def fit_constants(p, fit_options=None):
    """Fitted constants for :func:`contraction_constant`.

    All alpha norms use the frozen generator ``A(0)``.  The beta2 prefactor
    is multiplied by ``2^(1-alpha)`` so that the ``2^(1-alpha)`` factor of
    the formula also covers the slower ``delta/4`` decay of that estimate.
    """
    opts = dict(frozen=True)
    opts.update(fit_options or {})
    ef, dd = p.ef, p.dd
    fits = {}
    for target in ("eq1.1", "eq2.1", "beta1", "beta2"):
        fits[target] = fit_estimate(ef, dd, target, p.alpha, p.beta, p.mu, **opts)
    A0 = p.family(0.0)
    k = embedding_constant(A0, p.family.omega, p.alpha, p.beta)
    M = alpha_matrices(A0, p.family.omega, p.alpha)
    varpi = max(p.B.alpha_bound(M), p.C.alpha_bound(M))
    return FittedConstants(
        c_alpha=fits["eq1.1"].prefactor, m_alpha=fits["eq2.1"].prefactor,
        n_alpha_mu=fits["beta2"].prefactor * 2.0 ** (1 - p.alpha),
        m_alpha_beta=fits["beta1"].prefactor, k_alpha=k, delta=dd.delta,
        varpi=varpi, fits=fits,
        norm_discrepancy=frozen_norm_discrepancy(p, opts.get("s_samples")))


def problem_contraction(p, constants):
    c = constants
    return contraction_constant(p.K, p.alpha, c.delta, c.c_alpha, c.m_alpha,
                                c.n_alpha_mu, c.m_alpha_beta, c.k_alpha, c.varpi)


# -- solver --------------------------------------------------------------------

@dataclass
class FixedPointReport:
    iterates: int
    sup_alpha_residuals: list
    contraction_estimate: float
    observed_ratio: float
    a_posteriori_error: float
    converged: bool
    constants: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)


def _observed_ratio(res, floor):
    r = np.asarray(res, dtype=float)
    ok = r > floor
    r = r[ok]
    if r.size < 3:
        return 0.0
    tail = r[1:]
    if tail.size < 2:
        return float(tail[-1] / r[0]) if r[0] > 0 else 0.0
    # geometric fit from the second residual on
    slope = np.polyfit(np.arange(tail.size), np.log(tail), 1)[0]
    return float(np.exp(slope))


def solve(p, T_out, step=0.02, solve_tol=1e-10, max_iters=200, u0=None,
          override_gate=False, pad=None, quad_tol=1e-10, constants=None,
          fit_options=None, full=False):
    """Picard iteration ``u_{n+1} = M u_n`` from ``u_0 = 0``.

    Parameters
    ----------
    T_out : float
        Half-width of the returned window; the grid is padded by
        ``40 / delta`` on each side that carries a Green tail.
    u0 : callable or array, optional
        Initial iterate (callable of ``t`` returning ``(n, dim)``).
    override_gate : bool
        Iterate even when the a priori constant is at least 0.95.
    full : bool
        Return the solution on the padded grid instead of the window.

    Returns
    -------
    solution : SampledPath
    report : FixedPointReport
    """
    if constants is None and p.K == 0:
        # no Lipschitz coupling: the map is constant and the estimate is 0
        constants = FittedConstants(0.0, 0.0, 0.0, 0.0, 0.0, p.dd.delta, 0.0)
    elif constants is None:
        constants = fit_constants(p, fit_options)
    estimate = problem_contraction(p, constants)
    if estimate >= GATE:
        if not override_gate:
            raise PreconditionError(
                "solve", f"contraction constant {estimate:.3g} >= {GATE}; "
                         "use the override to iterate anyway")
        warnings.warn(f"contraction constant {estimate:.3g} >= {GATE}", stacklevel=2)
    grid = SolverGrid.for_problem(p, T_out, step, pad)
    op = MildOperator(p, grid, quad_tol)
    t = op.t
    if u0 is None:
        u = np.zeros((t.size, p.dim))
    elif callable(u0):
        u = np.asarray(u0(t), dtype=float).reshape(t.size, p.dim)
    else:
        u = np.asarray(u0, dtype=float).reshape(t.size, p.dim)
    residuals = []
    converged = False
    growth = 0
    for n in range(1, max_iters + 1):
        nxt = op.apply(u)
        res = op.alpha_sup(nxt - u)
        residuals.append(res)
        u = nxt
        if res < solve_tol:
            converged = True
            break
        if len(residuals) >= 2 and res > residuals[-2]:
            growth += 1
            if growth >= 3:
                raise ConvergenceError("solve", "residual grew across 3 "
                                                "consecutive iterations")
        else:
            growth = 0
    if not converged:
        raise ConvergenceError("solve", f"no convergence in {max_iters} iterations "
                                        f"(last residual {residuals[-1]:.2e})")
    scale = max(op.alpha_sup(u), 1.0)
    ratio = _observed_ratio(residuals, 1e3 * np.finfo(float).eps * scale)
    post = residuals[-1] * ratio / (1.0 - ratio) if ratio < 1 else np.inf
    report = FixedPointReport(
        iterates=len(residuals), sup_alpha_residuals=[float(r) for r in residuals],
        contraction_estimate=estimate, observed_ratio=ratio,
        a_posteriori_error=float(post), converged=converged,
        constants={"c_alpha": constants.c_alpha, "m_alpha": constants.m_alpha,
                   "n_alpha_mu": constants.n_alpha_mu,
                   "m_alpha_beta": constants.m_alpha_beta,
                   "k_alpha": constants.k_alpha, "delta": constants.delta,
                   "varpi": constants.varpi, "N": p.dd.N,
                   "frozen_norm_discrepancy": constants.norm_discrepancy},
        grid={"T_out": grid.T_out, "step": grid.step, "pad": grid.pad,
              "pad_right": grid.pad_right, "truncation_tail": op.tail_bound})
    values = u if p.dim > 1 else u[:, 0]
    path = SampledPath(t, values)
    if not full:
        path = path.restrict(T_out)
    return path, report


# -- verification ---------------------------------------------------------------

def mild_identity_residual(solution, p, pairs, order=8, panel_width=0.1):
    """Defect of the two-point mild identity for ``s < t`` grid pairs.

    ``u(t) + f(t) - U(t,s)(u(s) + f(s)) - int_s^t U(t,r) (g - A f)(r) dr``,
    with the forcings evaluated along the solution and the integrand
    interpolated by a cubic spline.
    """
    tt = solution.t
    U = solution.values.reshape(tt.size, -1)
    fv = p.forcing_f(tt, U)
    phi = p.forcing_g(tt, U) - p.apply_A(tt, fv)
    w = U + fv
    spline = CubicSpline(tt, phi, axis=0)
    out = []
    for s, t in pairs:
        i, j = int(np.argmin(np.abs(tt - s))), int(np.argmin(np.abs(tt - t)))
        s, t = tt[i], tt[j]
        nodes, weights = panel_nodes(s, t, panel_width, order)
        integral = sum(wq * (p.ef.propagator(t, r) @ spline(r))
                       for r, wq in zip(nodes, weights))
        defect = w[j] - p.ef.propagator(t, s) @ w[i] - integral
        out.append(float(np.linalg.norm(defect)))
    return out


@dataclass
class WpapReport:
    deviation: object = None
    certificate: object = None
    ap_solution: object = None
    passed: bool = False


def verify_wpap(solution, p, candidate_ap=None, weight=None, horizons=None,
                eps=1e-2, window_length=None, solve_kwargs=None,
                tol=DEFAULT_TOL, decay_threshold=DEFAULT_DECAY):
    """Check the almost periodic plus ergodic structure of a solution.

    Without ergodic forcing (``f_ap``/``g_ap`` unset, or equal to the full
    forcing) the solution itself must pass a translation certificate with
    window ``window_length``.  Otherwise the candidate almost periodic part
    (by default the solution of the problem driven by the almost periodic
    forcing parts alone) is subtracted and the remainder must lie in
    ``PAP_0`` under ``weight``.
    """
    weight = weight if weight is not None else p.weight
    ergodic = (p.f_ap is not None and p.f_ap is not p.f) or \
              (p.g_ap is not None and p.g_ap is not p.g)
    if not ergodic and candidate_ap is None:
        zero = not np.any(solution.values)
        if zero:
            return WpapReport(passed=True)
        l = window_length or 2 * np.pi
        T = solution.T_max
        scan = (0.0, 5 * l)
        cert = translation_certificate(solution, eps, l, scan_range=scan,
                                       t_range=(-T, T))
        return WpapReport(certificate=cert, passed=cert.passed)
    if candidate_ap is None:
        kwargs = dict(T_out=solution.T_max, step=solution.step)
        kwargs.update(solve_kwargs or {})
        candidate_ap, _ = solve(p.ap_only(), **kwargs)
    if isinstance(candidate_ap, SampledPath):
        remainder = solution - candidate_ap.restrict(solution.T_max)
    else:
        remainder = solution - candidate_ap
    if horizons is None:
        top = solution.T_max
        horizons = top / 2.0 ** np.arange(4)[::-1]
    dev = is_pap0(remainder, weight, horizons, tol, decay_threshold)
    return WpapReport(deviation=dev, ap_solution=candidate_ap,
                      passed=dev.decays_to_zero)
