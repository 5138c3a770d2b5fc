"""Weight functions, ergodic masses and weight classification.

A weight is a positive locally integrable density on the real line.  The
ergodic mass ``m(T, rho)`` is its integral over ``[-T, T]``; it normalises
the weighted time averages used throughout :mod:`wpap.pap`.

All limits at infinity are estimated over late windows of the largest
horizon supplied by the caller.  Estimates count as finite when they stay
below ``cap`` and do not keep growing from one window to the next.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import PreconditionError
from .quadrature import integrate

FINITE_CAP = 1e6
POSITIVITY_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Weight:
    """A positive weight ``rho`` on the real line.

    Use the constructors :meth:`constant`, :meth:`polynomial`,
    :meth:`expression` and :meth:`tabulated` rather than the raw fields.
    """

    kind: str
    name: str = ""
    value: float = 1.0
    exponent: int = 0
    func: object = None
    nodes: np.ndarray = None
    samples: np.ndarray = None

    @classmethod
    def constant(cls, c=1.0, name=None):
        if not c > 0:
            raise PreconditionError("Weight.constant", "constant must be positive")
        return cls("constant", name or f"const({c:g})", value=float(c))

    @classmethod
    def polynomial(cls, m, name=None):
        """``rho_m(t) = (1 + t**2)**m`` for a non-negative integer ``m``."""
        if int(m) != m or m < 0:
            raise PreconditionError("Weight.polynomial",
                                    "exponent must be a non-negative integer")
        return cls("polynomial", name or f"rho_{int(m)}", exponent=int(m))

    @classmethod
    def expression(cls, func, name="expression"):
        """Closed-form weight given by a vectorised callable."""
        return cls("expression", name, func=func)

    @classmethod
    def tabulated(cls, nodes, samples, name="tabulated"):
        """Samples joined by linear interpolation; undefined off the table."""
        nodes = np.asarray(nodes, dtype=float)
        samples = np.asarray(samples, dtype=float)
        if nodes.ndim != 1 or nodes.shape != samples.shape or nodes.size < 2:
            raise PreconditionError("Weight.tabulated", "need matching 1-D arrays")
        if np.any(np.diff(nodes) <= 0):
            raise PreconditionError("Weight.tabulated", "nodes must increase")
        if np.any(samples <= 0) or not np.all(np.isfinite(samples)):
            raise PreconditionError("Weight.tabulated",
                                    "samples must be positive and finite")
        return cls("tabulated", name, nodes=nodes, samples=samples)

    def raw(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full(t.shape, self.value)
        if self.kind == "polynomial":
            return (1.0 + t * t) ** self.exponent
        if self.kind == "expression":
            return np.broadcast_to(np.asarray(self.func(t), dtype=float),
                                   t.shape).copy()
        if self.kind == "tabulated":
            if t.size and (t.min() < self.nodes[0] or t.max() > self.nodes[-1]):
                raise PreconditionError(
                    "Weight.evaluate",
                    f"t outside table [{self.nodes[0]}, {self.nodes[-1]}]")
            return np.interp(t, self.nodes, self.samples)
        raise PreconditionError("Weight.evaluate", f"unknown kind {self.kind!r}")

    def __call__(self, t):
        vals = self.raw(t)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise PreconditionError("Weight.evaluate",
                                    f"weight {self.name} not positive/finite")
        return vals

    @property
    def support(self):
        if self.kind == "tabulated":
            return float(self.nodes[0]), float(self.nodes[-1])
        return -np.inf, np.inf

    def is_even(self, T=50.0, n=501):
        t = np.linspace(0.0, T, n)
        return bool(np.allclose(self.raw(t), self.raw(-t), rtol=1e-12, atol=0))


@dataclass(frozen=True)
class ErgodicMass:
    T: float
    value: float
    quadrature_error_bound: float


def _poly_mass(m, T):
    # int_{-T}^{T} (1+t^2)^m dt, expanded term by term
    return sum(comb(m, j) * 2.0 * T ** (2 * j + 1) / (2 * j + 1)
               for j in range(m + 1))


def _tabulated_mass(w, T):
    lo, hi = w.support
    if -T < lo or T > hi:
        raise PreconditionError("ergodic_mass",
                                f"horizon {T} exceeds table [{lo}, {hi}]")
    inner = (w.nodes > -T) & (w.nodes < T)
    t = np.concatenate(([-T], w.nodes[inner], [T]))
    return float(np.trapezoid(np.interp(t, w.nodes, w.samples), t))


def ergodic_mass(w, T, panel_width=0.5, order=8):
    """``m(T, rho)``: the integral of the weight over ``[-T, T]``.

    Exact for constant, polynomial and tabulated weights (the last through
    the piecewise-linear interpolant); composite Gauss-Legendre otherwise.
    """
    if not T > 0:
        raise PreconditionError("ergodic_mass", "horizon T must be positive")
    if w.kind == "constant":
        return ErgodicMass(T, 2.0 * T * w.value, 0.0)
    if w.kind == "polynomial":
        return ErgodicMass(T, _poly_mass(w.exponent, T), 0.0)
    if w.kind == "tabulated":
        return ErgodicMass(T, _tabulated_mass(w, T), 0.0)
    value, err = integrate(w, -T, T, panel_width=panel_width, order=order)
    return ErgodicMass(T, float(value), err)


def _late_windows(T, n=2001):
    """Sample grids for |t| in [T/4, T/2] and [T/2, T], both tails."""
    prev = np.linspace(T / 4, T / 2, n)
    last = np.linspace(T / 2, T, n)
    return np.concatenate((-prev, prev)), np.concatenate((-last, last))


def _finite(prev_sup, last_sup, cap, growth_tol):
    # values below 1 may creep upward without signalling divergence
    return bool(np.isfinite(last_sup) and last_sup < cap
                and last_sup <= (1.0 + growth_tol) * max(prev_sup, 1.0))


@dataclass
class WeightClass:
    in_U_infinity: bool
    in_U_B: bool
    translation_invariant: bool
    evidence: dict = field(default_factory=dict)


def classify_weight(w, horizons, tau_probe=(1.0, 5.0, -5.0), plateau_tol=1e-3,
                    floor=1e-8, cap=FINITE_CAP, growth_tol=0.05):
    """Decide membership of ``w`` in U_inf, U_B and translation invariance.

    * U_inf: the mass keeps growing between the last two horizons
      (relative increase at least ``plateau_tol``) and the weight stays above
      ``floor`` over the late window.
    * U_B: U_inf and the supremum of the weight stops growing.
    * translation invariance: for each probed shift both
      ``limsup rho(s+tau)/rho(s)`` and ``limsup m(T+tau)/m(T)`` are finite.
    """
    horizons = np.asarray(sorted(horizons), dtype=float)
    if horizons.size < 3:
        raise PreconditionError("classify_weight",
                                "need at least 3 horizons for trend evidence")
    if np.any(~np.isfinite(tau_probe)):
        raise PreconditionError("classify_weight", "shifts must be finite")
    T = horizons[-1]
    masses = [ergodic_mass(w, h).value for h in horizons]
    growth = (masses[-1] - masses[-2]) / masses[-1]
    prev, last = _late_windows(T)
    late_inf = float(np.min(w(last)))
    in_inf = bool(growth >= plateau_tol and late_inf > floor)

    sup_prev = float(np.max(w(np.linspace(-T / 2, T / 2, 4001))))
    sup_last = float(np.max(w(np.linspace(-T, T, 8001))))
    bounded = _finite(sup_prev, sup_last, cap, growth_tol)
    in_b = in_inf and bounded

    lo, hi = w.support
    shift_evidence = {}
    invariant = True
    for tau in tau_probe:
        tau = float(tau)
        # keep s + tau inside the table for tabulated weights
        pos_prev = prev[prev > 0]
        pos_last = last[last > 0]
        pos_prev = pos_prev[pos_prev + tau <= hi]
        pos_last = pos_last[pos_last + tau <= hi]
        if pos_last.size == 0 or pos_prev.size == 0:
            shift_evidence[repr(tau)] = {"limsup_rho_ratio": None,
                                         "limsup_mass_ratio": None,
                                         "finite": None}
            invariant = False
            continue
        r_prev = float(np.max(w(pos_prev + tau) / w(pos_prev)))
        r_last = float(np.max(w(pos_last + tau) / w(pos_last)))
        late_h = horizons[horizons >= T / 4]
        late_h = late_h[late_h + abs(tau) <= min(-lo, hi)]
        mass_ratios = [ergodic_mass(w, h + tau).value / ergodic_mass(w, h).value
                       for h in late_h if h + tau > 0]
        ok_a = _finite(r_prev, r_last, cap, growth_tol)
        ok_b = bool(mass_ratios) and max(mass_ratios) < cap
        shift_evidence[repr(tau)] = {
            "limsup_rho_ratio": r_last,
            "limsup_mass_ratio": max(mass_ratios) if mass_ratios else None,
            "finite": bool(ok_a and ok_b)}
        invariant = invariant and ok_a and ok_b

    evidence = {"horizons": horizons.tolist(), "masses": masses,
                "relative_mass_growth": growth, "late_window_inf": late_inf,
                "sup_half_horizon": sup_prev, "sup_full_horizon": sup_last,
                "shifts": shift_evidence}
    return WeightClass(in_inf, in_b, bool(invariant), evidence)


@dataclass
class EquivalenceVerdict:
    liminf_ratio_12: float
    limsup_ratio_21: float
    limsup_ratio_12: float
    equivalent: bool
    horizons_used: list


def weights_equivalent(w1, w2, horizons, cap=FINITE_CAP, growth_tol=0.05,
                       floor=POSITIVITY_FLOOR):
    """Estimate the ratio limits of two weights and decide equivalence.

    Equivalence requires the two-sided bound ``K' rho2 <= rho1 <= K rho2``
    for large ``|t|``, i.e. both ``limsup rho2/rho1`` and ``limsup rho1/rho2``
    finite.  ``liminf rho1/rho2`` is reported as well; it is the reciprocal
    of the first limsup.
    """
    horizons = sorted(float(h) for h in horizons)
    T = horizons[-1]
    prev, last = _late_windows(T)
    v1p, v2p, v1, v2 = w1(prev), w2(prev), w1(last), w2(last)
    if min(v1p.min(), v2p.min(), v1.min(), v2.min()) < floor:
        raise PreconditionError("weights_equivalent",
                                "weight value below the positivity floor")
    r12, r21 = v1 / v2, v2 / v1
    lim12 = float(np.max(r12))
    lim21 = float(np.max(r21))
    eq = (_finite(float(np.max(v2p / v1p)), lim21, cap, growth_tol)
          and _finite(float(np.max(v1p / v2p)), lim12, cap, growth_tol))
    return EquivalenceVerdict(float(np.min(r12)), lim21, lim12, bool(eq),
                              horizons)
