"""Evolution families, exponential dichotomies and interpolation norms.

Three kinds of generator ``t -> A(t)`` are supported:

* constant matrices,
* scalar-modulated matrices ``d(t) A`` with ``d = offset + signal``,
* arbitrary matrix-valued callables ("tabulated").

The first two commute with themselves at different times, so the
propagator is the exact exponential ``exp((int_s^t d) A)``.  Tabulated
families are stepped with a fixed-step fourth order Magnus integrator on a
grid anchored at ``t = 0`` (or the exponential midpoint rule, order 2).
"""

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy import linalg

from .ap import APSignal
from .errors import PreconditionError
from .quadrature import integrate

R_GRID = np.logspace(-3.0, 3.0, 61)
SPECTRAL_GAP_TOL = 1e-6
FIT_WINDOW = (0.5, 20.0)


def _as_matrix(a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise PreconditionError("LinearFamily", "generator must be square")
    return a


class LinearFamily:
    """Matrix-valued generator ``t -> A(t)``.

    Build with :meth:`constant`, :meth:`modulated` or :meth:`tabulated`.
    ``omega`` is the shift used by resolvents and interpolation norms; by
    default it is 0 when every sampled spectrum lies in the open left half
    plane and ``ceil(max Re lambda) + 1`` otherwise.  ``hoelder`` holds an
    optional claimed ``(L, exponent)`` pair.
    """

    def __init__(self, form, A=None, d=None, offset=0.0, func=None,
                 omega=None, hoelder=None, probe=None):
        self.form = form
        self.A = None if A is None else _as_matrix(A)
        self.d = d
        self.offset = float(offset)
        self.func = func
        self.hoelder = hoelder
        self.probe = (np.linspace(-50.0, 50.0, 2001) if probe is None
                      else np.asarray(probe, dtype=float))
        if form == "modulated":
            vals = self.modulation(self.probe)
            if vals.min() <= 0 or not np.all(np.isfinite(vals)):
                raise PreconditionError("LinearFamily",
                                        "modulation must stay positive and bounded")
        self.dim = self(0.0).shape[0]
        for t in self.probe[:: max(1, len(self.probe) // 40)]:
            a = self(t)
            if abs(np.linalg.det(a)) < 1e-300 or np.linalg.cond(a) > 1e14:
                raise PreconditionError("LinearFamily",
                                        f"A(t) singular at t={t:g}")
        self.omega = self._default_omega() if omega is None else float(omega)

    @classmethod
    def constant(cls, A, **kw):
        return cls("constant", A=A, **kw)

    @classmethod
    def modulated(cls, A, d, offset=0.0, **kw):
        """``A(t) = (offset + d(t)) A`` with ``d`` an APSignal or callable."""
        return cls("modulated", A=A, d=d, offset=offset, **kw)

    @classmethod
    def tabulated(cls, func, **kw):
        return cls("tabulated", func=func, **kw)

    @property
    def commuting(self):
        return self.form in ("constant", "modulated")

    def modulation(self, t):
        t = np.asarray(t, dtype=float)
        if self.form == "constant":
            return np.ones(t.shape)
        if self.form != "modulated":
            raise PreconditionError("LinearFamily.modulation",
                                    "family is not scalar-modulated")
        base = np.zeros(t.shape) if self.d is None else np.asarray(self.d(t))
        return self.offset + base

    def modulation_integral(self, t, s):
        """``int_s^t d(r) dr`` (closed form for APSignal modulations)."""
        if self.form == "constant":
            return float(t - s)
        if self.d is None:
            return self.offset * (t - s)
        if isinstance(self.d, APSignal):
            return float(np.real(self.offset * (t - s) + self.d.integral(t, s)))
        lo, hi, sign = (s, t, 1.0) if t >= s else (t, s, -1.0)
        if hi == lo:
            return 0.0
        val, _ = integrate(self.modulation, lo, hi, panel_width=0.25)
        return sign * float(val)

    def __call__(self, t):
        if self.form == "constant":
            return self.A
        if self.form == "modulated":
            return float(self.modulation(t)) * self.A
        return _as_matrix(self.func(float(t)))

    def spectrum(self, t=0.0):
        return np.linalg.eigvals(self(t))

    def _default_omega(self):
        if self.commuting:
            top = float(np.max(np.linalg.eigvals(self.A).real))
            if self.form == "modulated" and top > 0:
                top *= float(np.max(self.modulation(self.probe)))
        else:
            top = max(float(np.max(np.linalg.eigvals(self(t)).real))
                      for t in self.probe[:: max(1, len(self.probe) // 40)])
        return 0.0 if top < 0 else float(np.ceil(top) + 1.0)


class EvolutionFamily:
    """Propagators ``U(t, s)`` of ``u' = A(t) u``.

    Parameters
    ----------
    family : LinearFamily
    step : float
        Fixed Magnus step for tabulated families.
    order : {2, 4}
        Magnus order for tabulated families.
    """

    def __init__(self, family, step=0.01, order=4, tol=1e-10):
        if order not in (2, 4):
            raise PreconditionError("EvolutionFamily", "order must be 2 or 4")
        self.family = family
        self.step = float(step)
        self.order = order
        self.tol = float(tol)
        self._cache = {}
        if family.commuting:
            lam, V = np.linalg.eig(family.A)
            if np.linalg.cond(V) < 1e8:
                self._eig = (lam, V, np.linalg.inv(V))
            else:
                self._eig = None

    def _exact(self, D):
        if self._eig is None:
            return linalg.expm(D * self.family.A)
        lam, V, Vi = self._eig
        out = (V * np.exp(D * lam)) @ Vi
        return out.real if np.isrealobj(self.family.A) else out

    def _magnus_step(self, a, b):
        h = b - a
        A = self.family
        if self.order == 2:
            return linalg.expm(h * A(0.5 * (a + b)))
        c = sqrt(3.0) / 6.0
        A1, A2 = A(a + (0.5 - c) * h), A(a + (0.5 + c) * h)
        omega = 0.5 * h * (A1 + A2) + (sqrt(3.0) / 12.0) * h * h * (A2 @ A1 - A1 @ A2)
        return linalg.expm(omega)

    def _stepped(self, t, s):
        h = self.step
        if t == s:
            return np.eye(self.family.dim)
        direction = 1.0 if t > s else -1.0
        # interior nodes on the global grid k*h between s and t
        lo, hi = min(s, t), max(s, t)
        k0, k1 = int(np.floor(lo / h)) + 1, int(np.ceil(hi / h)) - 1
        nodes = h * np.arange(k0, k1 + 1)
        nodes = nodes[(nodes > lo + 1e-12 * h) & (nodes < hi - 1e-12 * h)]
        pts = np.concatenate(([s], nodes[::int(direction)], [t]))
        U = np.eye(self.family.dim)
        for a, b in zip(pts[:-1], pts[1:]):
            U = self._magnus_step(a, b) @ U
            if not np.all(np.isfinite(U)):
                raise PreconditionError("propagate",
                                        "step rejected: propagator overflow")
        return U

    def propagator(self, t, s):
        """``U(t, s)``; ``t < s`` returns the backward (inverse) map."""
        t, s = float(t), float(s)
        key = (t, s)
        if key in self._cache:
            return self._cache[key]
        if self.family.commuting:
            U = self._exact(self.family.modulation_integral(t, s))
        else:
            U = self._stepped(t, s)
        if not np.all(np.isfinite(U)):
            raise PreconditionError("propagate", "propagator overflow")
        if len(self._cache) < 100000:
            self._cache[key] = U
        return U

    def propagate(self, t, s, x):
        return self.propagator(t, s) @ np.asarray(x, dtype=float)

    def cocycle_defect(self, t, s, r):
        """``|U(t,s)U(s,r) - U(t,r)|`` relative to ``max(1, |U(t,s)||U(s,r)|)``.

        The scale is the size of the product, so growing unstable modes do
        not inflate the defect through round-off alone.
        """
        a, b = self.propagator(t, s), self.propagator(s, r)
        scale = max(1.0, np.linalg.norm(a, 2) * np.linalg.norm(b, 2))
        return float(np.linalg.norm(a @ b - self.propagator(t, r), 2) / scale)


@dataclass
class DichotomyData:
    """Constant spectral projection and fitted dichotomy constants."""

    P: np.ndarray
    N: float
    delta: float
    delta_stable: float
    delta_unstable: float
    checks: dict = field(default_factory=dict)

    @property
    def Q(self):
        return np.eye(len(self.P)) - self.P

    @property
    def has_unstable(self):
        return bool(np.linalg.norm(self.Q) > 1e-12)


def spectral_projection(A, gap_tol=SPECTRAL_GAP_TOL):
    """Projection onto the generalized eigenspace of ``Re lambda < 0``."""
    lam, V = np.linalg.eig(A)
    if np.any(np.abs(lam.real) < gap_tol):
        raise PreconditionError("dichotomy",
                                "eigenvalue on the imaginary axis (no hyperbolicity)")
    if np.linalg.cond(V) > 1e10:
        # defective matrix: Schur form with stable block first
        T, Z, k = linalg.schur(A, output="complex", sort="lhp")
        Ts = T[:k, :k]
        X = linalg.solve_sylvester(Ts, -T[k:, k:], -T[:k, k:])
        E = np.eye(len(A), dtype=complex)
        E[:k, k:] = X
        core = np.zeros_like(E)
        core[:k, :k] = np.eye(k)
        Pz = E @ core @ np.linalg.inv(E)
        return (Z @ Pz @ Z.conj().T).real
    stable = lam.real < 0
    Vi = np.linalg.inv(V)
    return (V[:, stable] @ Vi[stable, :]).real


def _decay_fit(taus, norms):
    keep = norms > 1e-300
    if keep.sum() < 2:
        return np.inf
    slope = np.polyfit(taus[keep], np.log(norms[keep]), 1)[0]
    return float(-slope)


def dichotomy(ef, s_samples=None, fit_window=FIT_WINDOW, n_tau=40,
              gap_tol=SPECTRAL_GAP_TOL):
    """Spectral projection plus fitted ``N`` and ``delta``.

    ``delta`` is the smaller of the least-squares decay rates of
    ``max_s |U(s+tau, s) P|`` and ``max_s |U(s, s+tau) Q|`` over
    ``tau`` in ``fit_window``; ``N`` is the smallest constant making
    ``N exp(-delta tau)`` dominate every sample (including ``tau = 0``).
    Tabulated families are accepted only when every sampled ``A(t)`` is
    stable; then ``P = I``.
    """
    fam = ef.family
    if s_samples is None:
        s_samples = np.linspace(-20.0, 20.0, 9)
    if fam.commuting:
        P = spectral_projection(fam.A, gap_tol)
    else:
        tops = [np.max(np.linalg.eigvals(fam(t)).real) for t in fam.probe[::50]]
        if max(tops) > -gap_tol:
            raise PreconditionError("dichotomy",
                                    "tabulated family must have stable spectra")
        P = np.eye(fam.dim)
    Q = np.eye(fam.dim) - P
    taus = np.linspace(fit_window[0], fit_window[1], n_tau)
    all_taus = np.concatenate(([0.0], taus))

    def sweep(proj, forward):
        out = np.zeros(all_taus.size)
        for j, tau in enumerate(all_taus):
            vals = []
            for s in s_samples:
                U = ef.propagator(s + tau, s) if forward else ef.propagator(s, s + tau)
                vals.append(np.linalg.norm(U @ proj, 2))
            out[j] = max(vals)
        return out

    stable = sweep(P, True)
    d_p = _decay_fit(taus, stable[1:])
    has_q = np.linalg.norm(Q) > 1e-12
    unstable = sweep(Q, False) if has_q else np.zeros(all_taus.size)
    d_q = _decay_fit(taus, unstable[1:]) if has_q else np.inf
    delta = min(d_p, d_q)
    if not np.isfinite(delta) or delta <= 0:
        raise PreconditionError("dichotomy", "no positive decay rate found")
    N = max(1.0, float(np.max(stable * np.exp(delta * all_taus))),
            float(np.max(unstable * np.exp(delta * all_taus))))

    # properties: projection, commutation, bound on a (t, s) grid
    comm = 0.0
    bound_violation = 0.0
    for s in s_samples:
        for tau in (0.0, 0.5, 2.0, 5.0):
            U = ef.propagator(s + tau, s)
            comm = max(comm, float(np.linalg.norm(U @ P - P @ U, 2)))
            lhs = np.linalg.norm(U @ P, 2)
            bound_violation = max(bound_violation,
                                  lhs - N * np.exp(-delta * tau))
    checks = {"idempotence_defect": float(np.linalg.norm(P @ P - P, 2)),
              "commutation_defect": comm,
              "bound_violation": float(max(bound_violation, 0.0)),
              "stable_curve": {"tau": all_taus.tolist(), "norm": stable.tolist()},
              "unstable_curve": {"tau": all_taus.tolist(),
                                 "norm": unstable.tolist()}}
    return DichotomyData(P, N, float(delta), float(d_p), float(d_q), checks)


def green_kernel(ef, dd, t, s, x=None):
    """``U(t,s)P x`` for ``t >= s`` and ``-U~_Q(t,s) Q x`` for ``t < s``.

    Without ``x`` the kernel matrix is returned.
    """
    if t >= s:
        G = ef.propagator(t, s) @ dd.P
    elif not dd.has_unstable:
        G = np.zeros_like(dd.P)
    else:
        G = -(ef.propagator(t, s) @ dd.Q)
    return G if x is None else G @ np.asarray(x, dtype=float)


# -- interpolation norms ----------------------------------------------------

def alpha_matrices(A, omega, alpha, r_grid=R_GRID):
    """Stack of ``r**alpha (A - omega) R(r, A - omega)`` over ``r_grid``."""
    A = _as_matrix(A)
    B = A - omega * np.eye(len(A))
    out = np.empty((len(r_grid), len(A), len(A)))
    for j, r in enumerate(r_grid):
        try:
            res = np.linalg.solve(r * np.eye(len(A)) - B, B)
        except np.linalg.LinAlgError as exc:
            raise PreconditionError("alpha_norm",
                                    f"resolvent singular at r={r:g}") from exc
        out[j] = r ** alpha * res
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > 1e14:
        raise PreconditionError("alpha_norm", "resolvent solve failed")
    return out


@dataclass
class AlphaNorm:
    alpha: float
    value: float
    r_max: float
    r_grid: np.ndarray = field(repr=False, default=None)
    embedding_constant: float = None


def alpha_norm(family, x, alpha, r_grid=R_GRID, t=0.0):
    """``sup_r |r^alpha (A - omega) R(r, A - omega) x|`` on ``r_grid``.

    ``alpha = 0`` returns the ambient norm by convention.
    """
    x = np.asarray(x, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    if alpha == 0:
        return AlphaNorm(0.0, float(np.linalg.norm(x)), np.nan, r_grid)
    if not 0 < alpha < 1:
        raise PreconditionError("alpha_norm", "alpha must lie in (0, 1)")
    if np.log10(r_grid.max() / r_grid.min()) < 6 - 1e-9:
        raise PreconditionError("alpha_norm", "r_grid must span 6 decades")
    A = family(t) if callable(family) else family
    omega = getattr(family, "omega", 0.0)
    M = alpha_matrices(A, omega, alpha, r_grid)
    vals = np.linalg.norm(M @ x, axis=-1) if x.ndim == 1 else \
        np.linalg.norm(np.einsum("rij,j->ri", M, x), axis=-1)
    j = int(np.argmax(vals))
    return AlphaNorm(float(alpha), float(vals[j]), float(r_grid[j]), r_grid)


def alpha_norms_of_samples(M, values):
    """Per-row alpha norms of ``values`` (shape ``(n, dim)``)."""
    vals = np.einsum("rij,nj->nri", M, np.atleast_2d(values))
    return np.linalg.norm(vals, axis=-1).max(axis=1)


def operator_bound(M_out, T, M_in=None, subset=4):
    """Rigorous bound of ``|T x|_alpha`` against ``|x|`` or ``|x|_beta``.

    With ``M_in`` (the beta matrices) the bound is
    ``max_r' min_r |M_out[r'] T M_in[r]^{-1}|``, valid because
    ``|x|_beta >= |M_in[r] x|`` for every ``r``; ``subset`` thins the inner
    grid.
    """
    if M_in is None:
        return float(np.max(np.linalg.norm(M_out @ T, ord=2, axis=(1, 2))))
    inv = np.linalg.inv(M_in[::subset])
    prods = (M_out @ T)[:, None] @ inv[None, :]
    norms = np.linalg.norm(prods, ord=2, axis=(2, 3))
    return float(np.max(np.min(norms, axis=1)))


def embedding_constant(A, omega, alpha, beta, r_grid=R_GRID):
    """``k`` with ``|x|_alpha <= k |x|_beta``."""
    Ma = alpha_matrices(A, omega, alpha, r_grid)
    Mb = alpha_matrices(A, omega, beta, r_grid)
    return operator_bound(Ma, np.eye(len(Ma[0])), Mb, subset=1)


def interpolation_constant(A, omega, alpha):
    """``c`` with ``|x|_alpha <= c |x|^(1-alpha) |A x|^alpha``.

    Bound for diagonalizable ``A``: the scalar optimum
    ``alpha^alpha (1-alpha)^(1-alpha)`` times the eigenvector condition
    number, inflated by ``(1 + |omega| / min |lambda|)^alpha`` for the shift.
    """
    A = _as_matrix(A)
    lam, V = np.linalg.eig(A)
    kappa = np.linalg.cond(V)
    if not np.isfinite(kappa) or kappa > 1e10:
        raise PreconditionError("interpolation_constant",
                                "generator is not diagonalizable")
    scalar = alpha ** alpha * (1 - alpha) ** (1 - alpha) if alpha > 0 else 1.0
    shift = (1.0 + abs(omega) / np.min(np.abs(lam))) ** alpha
    return float(kappa * scalar * shift)


# -- decay estimates --------------------------------------------------------

TARGETS = {
    # name: (rate factor of delta, power exponent flag, input norm)
    "eq1.1": (0.5, True, "ambient"),
    "eq2.1": (1.0, False, "ambient"),
    "beta1": (1.0, False, "beta"),
    "beta2": (0.25, True, "beta"),
}


@dataclass
class EstimateFit:
    target: str
    prefactor: float
    decay_rate: float
    power_exponent: float
    required_rate: float
    rate_ok: bool
    taus: list = field(default_factory=list)
    bounds: list = field(default_factory=list)
    residuals: list = field(default_factory=list)


def check_exponents(alpha, beta=None, mu=None):
    if not 0 < alpha < 1:
        raise PreconditionError("fit_estimate", "alpha must lie in (0, 1)")
    if beta is None or mu is None:
        return
    if not (0 <= mu < alpha < beta < 1):
        raise PreconditionError("fit_estimate", "need 0 <= mu < alpha < beta < 1")
    if not 2 * alpha > mu + 1:
        raise PreconditionError("fit_estimate", "need 2 alpha > mu + 1")


def _estimate_operator(ef, dd, target, t, s):
    """Operator whose norm the target estimate bounds (``t - s = tau > 0``)."""
    fam = ef.family
    if target == "eq1.1":
        return ef.propagator(t, s) @ dd.P, t, s
    if target == "eq2.1":
        # U~_Q(s, t) Q with s < t maps time t data back to time s
        return ef.propagator(s, t) @ dd.Q, s, t
    if target == "beta1":
        return ef.propagator(s, t) @ dd.Q @ fam(t), s, t
    return ef.propagator(t, s) @ dd.P @ fam(s), t, s


def fit_estimate(ef, dd, target, alpha, beta=None, mu=None, taus=None,
                 s_samples=None, fit_window=FIT_WINDOW, rate_tol=0.05,
                 r_grid=R_GRID, frozen=False):
    """Fit the constant and decay rate of one of the four decay estimates.

    For each ``(s, tau)`` the operator norm from the input space (ambient or
    beta) to the alpha space is bounded rigorously, divided by the target's
    structural factor ``tau**(-p) exp(-rate tau)``; the sup is the fitted
    prefactor.  The decay rate is the least-squares slope of
    ``log(max_s bound * tau**p)`` over ``fit_window``.

    ``frozen=True`` measures every alpha norm against ``A(0)``.
    """
    if target not in TARGETS:
        raise PreconditionError("fit_estimate", f"unknown target {target!r}")
    factor, has_power, source = TARGETS[target]
    if target.startswith("beta"):
        if beta is None or mu is None:
            raise PreconditionError("fit_estimate", "beta targets need beta and mu")
        check_exponents(alpha, beta, mu)
    else:
        check_exponents(alpha)
    if taus is None:
        taus = np.concatenate((np.geomspace(1e-3, 0.4, 12),
                               np.linspace(fit_window[0], fit_window[1], 40)))
    taus = np.asarray(taus, dtype=float)
    if target in ("eq2.1", "beta1") and not dd.has_unstable:
        # Q = 0: the left side vanishes identically
        zeros = [0.0] * taus.size
        return EstimateFit(target, 0.0, np.inf, 0.0, factor * dd.delta, True,
                           taus.tolist(), zeros, zeros)
    if s_samples is None:
        s_samples = np.linspace(-20.0, 20.0, 5)
    fam = ef.family
    p = alpha if has_power else 0.0
    rate = factor * dd.delta
    cache = {}

    def mats(time, a):
        key = (0.0 if frozen else float(time), a)
        if key not in cache:
            cache[key] = alpha_matrices(fam(key[0]), fam.omega, a, r_grid)
        return cache[key]

    bounds = np.zeros(taus.size)
    for j, tau in enumerate(taus):
        best = 0.0
        for s in s_samples:
            T, t_out, t_in = _estimate_operator(ef, dd, target, s + tau, s)
            if np.linalg.norm(T) == 0:
                continue
            M_in = mats(t_in, beta) if source == "beta" else None
            best = max(best, operator_bound(mats(t_out, alpha), T, M_in))
        bounds[j] = best
    structural = taus ** (-p) * np.exp(-rate * taus)
    prefactor = float(np.max(bounds / structural))
    window = (taus >= fit_window[0]) & (taus <= fit_window[1])
    fitted = _decay_fit(taus[window], bounds[window] * taus[window] ** p)
    residuals = (bounds / structural / prefactor) if prefactor > 0 else bounds
    ok = bool(fitted >= rate * (1.0 - rate_tol))
    return EstimateFit(target, prefactor, fitted, p, rate, ok, taus.tolist(),
                       bounds.tolist(), residuals.tolist())


# -- sectorial, Hoelder and shift-domination checks --------------------------

@dataclass
class ATReport:
    resolvent_constant: float
    hoelder_constant: float
    hoelder_exponent: float
    fitted_exponent: float
    passed: bool
    details: dict = field(default_factory=dict)


def check_AT(family, t_samples=None, theta=0.75 * np.pi, radii=None,
             n_angles=25, separations=None, cap=1e6, min_exponent=0.1):
    """Resolvent bound on a sector grid plus a Hoelder test in time.

    ``K = max (1+|lambda|) |R(lambda, A(t) - omega)|`` over the sector
    ``|arg lambda| <= theta``.  The Hoelder quantity
    ``q(h) = max |(A(c+h/2) - A(c-h/2)) R(omega, A(r))|`` is measured over
    centres ``c`` and separations ``h``; its log-log slope estimates the
    exponent and ``L = max q(h) / h**gamma``.
    """
    if t_samples is None:
        t_samples = np.linspace(-10.0, 10.0, 201)
    t_samples = np.asarray(t_samples, dtype=float)
    if radii is None:
        radii = np.concatenate(([0.0], np.logspace(-3, 3, 25)))
    if separations is None:
        separations = np.geomspace(1e-4, 1.0, 9)
    angles = np.linspace(-theta, theta, n_angles)
    lams = np.unique(np.outer(radii, np.exp(1j * angles)).ravel())
    n = family.dim
    eye = np.eye(n)
    K = 0.0
    for t in t_samples[:: max(1, len(t_samples) // 20)]:
        B = family(t) - family.omega * eye
        for lam in lams:
            try:
                R = np.linalg.inv(lam * eye - B)
            except np.linalg.LinAlgError:
                K = np.inf
                break
            K = max(K, (1 + abs(lam)) * np.linalg.norm(R, 2))
    # Hoelder
    r_samples = t_samples[:: max(1, len(t_samples) // 10)]
    resolvents = [np.linalg.inv(family.omega * eye - family(r)) for r in r_samples]
    q = np.zeros(len(separations))
    for j, h in enumerate(separations):
        best = 0.0
        for c in t_samples:
            diff = family(c + h / 2) - family(c - h / 2)
            if not np.any(diff):
                continue
            best = max(best, max(np.linalg.norm(diff @ R, 2) for R in resolvents))
        q[j] = best
    pos = q > 0
    if pos.sum() >= 2:
        slope = float(np.polyfit(np.log(separations[pos]), np.log(q[pos]), 1)[0])
    else:
        slope = 1.0  # A(t) constant along every probed pair
    claimed = family.hoelder[1] if family.hoelder else min(slope, 1.0)
    L = float(np.max(q / separations ** claimed)) if claimed > 0 else np.inf
    passed = bool(np.isfinite(K) and K < cap and claimed >= min_exponent
                  and slope >= claimed - 0.05 and L < cap)
    details = {"separations": separations.tolist(), "hoelder_quantity": q.tolist(),
               "theta": float(theta)}
    return ATReport(float(K), L, float(claimed), slope, passed, details)


@dataclass
class H4Report:
    tau: float
    epsilon_required: float
    dominated: bool
    max_lhs: float


def check_H4(ef, tau, epsilon, kernel=None, delta=None, alpha0=0.5, C=1.0,
             t_samples=None, lags=None):
    """Measure ``|A(t+tau)U(t+tau,s+tau) - A(t)U(t,s)|`` against ``eps H``.

    Only scalar-modulated (or constant) families are supported.  The
    default kernel is ``H(r) = C r**(-alpha0) exp(-delta r / 8)``.
    ``epsilon_required`` is the smallest ``eps`` making the sampled left
    side dominated.
    """
    fam = ef.family
    if not fam.commuting:
        raise PreconditionError("check_H4", "only scalar-modulated families")
    if kernel is None:
        if delta is None:
            raise PreconditionError("check_H4", "default kernel needs delta")
        kernel = lambda r: C * r ** (-alpha0) * np.exp(-delta * r / 8.0)
    if t_samples is None:
        t_samples = np.linspace(-20.0, 20.0, 41)
    if lags is None:
        lags = np.concatenate((np.geomspace(1e-2, 1.0, 8), np.linspace(1.5, 20, 20)))
    worst, worst_lhs = 0.0, 0.0
    for t in t_samples:
        for lag in lags:
            s = t - lag
            lhs = np.linalg.norm(fam(t + tau) @ ef.propagator(t + tau, s + tau)
                                 - fam(t) @ ef.propagator(t, s), 2)
            worst_lhs = max(worst_lhs, lhs)
            worst = max(worst, lhs / kernel(lag))
    return H4Report(float(tau), float(worst), bool(worst <= epsilon), float(worst_lhs))


def decay_curve(ef, dd, taus, s_samples=None):
    """Sampled ``max_s |U(s+tau, s) P|`` for export."""
    if s_samples is None:
        s_samples = np.linspace(-20.0, 20.0, 9)
    return np.array([max(np.linalg.norm(ef.propagator(s + tau, s) @ dd.P, 2)
                         for s in s_samples) for tau in taus])
