"""Weighted ergodic means, PAP_0 membership decisions and closure harnesses.

A bounded function ``f`` lies in ``PAP_0(X, rho)`` when its weighted mean
norm

    M(T) = (1 / m(T, rho)) * int_{-T}^{T} |f(s)| rho(s) ds

tends to zero.  :func:`is_pap0` turns that limit into a finite-horizon
decision: the last three horizon steps must each shrink ``M`` by at least
``decay_threshold`` and the final value must lie below ``tol``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .ap import APSignal, translation_certificate
from .errors import PreconditionError
from .quadrature import panel_nodes
from .weights import classify_weight, ergodic_mass, weights_equivalent

DEFAULT_TOL = 1e-2
DEFAULT_DECAY = 0.75
DEFAULT_HORIZONS = (20.0, 40.0, 80.0, 160.0, 320.0)


@dataclass
class SampledPath:
    """Samples of a (vector-valued) function on a uniform grid.

    ``values`` has shape ``(n,)`` or ``(n, dim)``.  ``norm`` maps a
    ``(n, dim)`` block of samples to ``n`` norms; the default is the
    Euclidean norm, tagged ``"ambient"`` in ``norm_kind``.
    """

    t: np.ndarray
    values: np.ndarray
    norm_kind: str = "ambient"
    norm: object = field(default=None, repr=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.ndim != 1 or self.t.size < 2 or len(self.values) != self.t.size:
            raise PreconditionError("SampledPath", "need matching 1-D grid")
        steps = np.diff(self.t)
        if steps.min() <= 0 or np.ptp(steps) > 1e-9 * max(1.0, steps.mean()):
            raise PreconditionError("SampledPath", "grid must be uniform")
        if not np.all(np.isfinite(self.values)):
            raise PreconditionError("SampledPath", "values must be finite")

    @classmethod
    def from_function(cls, func, T_max, step, **kwargs):
        n = int(round(T_max / step))
        t = np.linspace(-n * step, n * step, 2 * n + 1)
        return cls(t, np.asarray(func(t)), **kwargs)

    @property
    def step(self):
        return float(self.t[1] - self.t[0])

    @property
    def T_max(self):
        return float(min(-self.t[0], self.t[-1]))

    def norms(self):
        vals = self.values
        if self.norm is not None:
            return np.asarray(self.norm(vals.reshape(len(self.t), -1)))
        if vals.ndim == 1:
            return np.abs(vals)
        return np.linalg.norm(vals.reshape(len(self.t), -1), axis=1)

    def with_values(self, values):
        return SampledPath(self.t, values, self.norm_kind, self.norm)

    def __sub__(self, other):
        if isinstance(other, SampledPath):
            other = other.values
        elif callable(other):
            other = np.asarray(other(self.t))
        return self.with_values(self.values - other)

    def __add__(self, other):
        if isinstance(other, SampledPath):
            other = other.values
        return self.with_values(self.values + other)

    def restrict(self, T):
        keep = np.abs(self.t) <= T + 1e-9 * self.step
        return SampledPath(self.t[keep], self.values[keep], self.norm_kind,
                           self.norm)

    def interpolant(self):
        return CubicSpline(self.t, self.values, axis=0)


def _norms_of(vals):
    vals = np.asarray(vals)
    if vals.ndim == 1:
        return np.abs(vals)
    return np.linalg.norm(vals.reshape(len(vals), -1), axis=1)


def weighted_ergodic_norm(path, w, T):
    """``(1/m(T,rho)) int_{-T}^{T} |f| rho`` for a sampled path.

    Trapezoidal rule on the grid; the two end panels are cut at ``+-T``
    with linear interpolation of the norm.
    """
    if T > path.T_max * (1 + 1e-12):
        raise PreconditionError("weighted_ergodic_norm",
                                f"horizon {T} exceeds path support {path.T_max}")
    norms = path.norms()
    inner = np.abs(path.t) < T
    t = np.concatenate(([-T], path.t[inner], [T]))
    vals = np.concatenate(([np.interp(-T, path.t, norms)], norms[inner],
                           [np.interp(T, path.t, norms)]))
    integral = np.trapezoid(vals * w(t), t)
    return float(integral / ergodic_mass(w, T).value)


def weighted_ergodic_norm_exact(func, w, T, panel_width=0.5, order=8):
    """Same mean for a closed-form ``func`` using Gauss-Legendre panels.

    Nodes avoid ``t = 0`` by construction (even panel count), so kinks at
    the origin do not spoil the rule.
    """
    nodes, weights = panel_nodes(-T, 0.0, panel_width, order)
    nodes2, weights2 = panel_nodes(0.0, T, panel_width, order)
    nodes = np.concatenate((nodes, nodes2))
    weights = np.concatenate((weights, weights2))
    integral = np.dot(weights, _norms_of(func(nodes)) * w(nodes))
    return float(integral / ergodic_mass(w, T).value)


@dataclass
class ErgodicDeviation:
    horizons: list
    values: list
    decays_to_zero: bool
    fitted_rate: float
    ratios: list = field(default_factory=list)


def _check_schedule(horizons, op):
    h = np.asarray(horizons, dtype=float)
    if h.size < 4:
        raise PreconditionError(op, "need at least 4 horizons")
    ratios = h[1:] / h[:-1]
    if np.any(ratios <= 1.0) or np.ptp(ratios) > 1e-9 * ratios.mean():
        raise PreconditionError(op, "horizon schedule must be geometric")
    return h


def decide(horizons, values, tol=DEFAULT_TOL, decay_threshold=DEFAULT_DECAY):
    """Apply the finite-horizon PAP_0 decision rule to a deviation curve."""
    values = np.asarray(values, dtype=float)
    ratios = []
    for a, b in zip(values[:-1], values[1:]):
        ratios.append(0.0 if b <= 1e-300 else (b / a if a > 0 else np.inf))
    last = ratios[-3:]
    decays = bool(all(r <= decay_threshold for r in last) and values[-1] < tol)
    pos = values > 1e-300
    if pos.sum() >= 2:
        slope = np.polyfit(np.log(np.asarray(horizons)[pos]),
                           np.log(values[pos]), 1)[0]
        rate = float(-slope)
    else:
        rate = float("inf")
    return ErgodicDeviation(list(map(float, horizons)), values.tolist(), decays,
                            rate, [float(r) for r in ratios])


def is_pap0(fn, w, horizons=DEFAULT_HORIZONS, tol=DEFAULT_TOL,
            decay_threshold=DEFAULT_DECAY):
    """Decide whether ``fn`` belongs to ``PAP_0(X, rho)``.

    Parameters
    ----------
    fn : callable or SampledPath
        Closed-form functions are integrated by Gauss-Legendre panels,
        sampled paths by the trapezoidal rule on their grid.
    horizons : sequence of float
        At least four horizons in geometric progression.
    """
    h = _check_schedule(horizons, "is_pap0")
    if isinstance(fn, SampledPath):
        values = [weighted_ergodic_norm(fn, w, T) for T in h]
    else:
        values = [weighted_ergodic_norm_exact(fn, w, T) for T in h]
    return decide(h, values, tol, decay_threshold)


def _trim_kernel(vals, rel_mass=1e-12):
    mass = np.abs(vals)
    total = mass.sum()
    if total == 0:
        return 0, len(vals)
    cum = np.cumsum(mass)
    lo = int(np.searchsorted(cum, rel_mass * total, side="right"))
    rcum = np.cumsum(mass[::-1])
    hi = len(vals) - int(np.searchsorted(rcum, rel_mass * total, side="right"))
    return min(lo, hi - 1), max(hi, lo + 1)


def convolve_path(path, kernel, support):
    """Grid convolution ``(f * k)(t) = int f(t - s) k(s) ds``.

    The kernel is sampled on the path's step over ``support`` (endpoints
    snapped to the grid), integrated with trapezoidal weights and trimmed
    where the tail mass drops below ``1e-12`` of the total.  Values of
    ``f`` outside the grid count as zero.
    """
    h = path.step
    j0 = int(np.floor(support[0] / h + 1e-9))
    j1 = int(np.ceil(support[1] / h - 1e-9))
    s = h * np.arange(j0, j1 + 1)
    kv = np.asarray(kernel(s), dtype=float)
    wts = np.full(s.size, h)
    wts[0] = wts[-1] = 0.5 * h
    kk = kv * wts
    lo, hi = _trim_kernel(kk)
    kk, j0 = kk[lo:hi], j0 + lo
    vals = path.values.reshape(len(path.t), -1)
    n = len(path.t)
    out = np.zeros_like(vals)
    for c in range(vals.shape[1]):
        full = np.convolve(vals[:, c], kk)
        idx = np.arange(n) - j0
        ok = (idx >= 0) & (idx < full.size)
        out[ok, c] = full[idx[ok]]
    out = out.reshape(path.values.shape)
    return path.with_values(out), float(np.sum(np.abs(kk)))


def convolve_and_test(f, kernel, support, w, horizons=None, weight_class=None,
                      l1_cap=1e6, tol=DEFAULT_TOL,
                      decay_threshold=DEFAULT_DECAY):
    """PAP_0 decision for the convolution of a sampled path with a kernel.

    The weight must be translation invariant (classified here unless
    ``weight_class`` is given); the kernel's L1 mass must stay below
    ``l1_cap``.  Horizons default to a doubling schedule that keeps clear of
    the grid edge by the kernel's reach.
    """
    reach = max(abs(support[0]), abs(support[1]))
    if horizons is None:
        top = f.T_max - reach
        horizons = top / 2.0 ** np.arange(4)[::-1]
    if weight_class is None:
        weight_class = classify_weight(w, list(horizons))
    if not weight_class.translation_invariant:
        raise PreconditionError("convolve_and_test",
                                "weight is not translation invariant")
    conv, l1 = convolve_path(f, kernel, support)
    if l1 > l1_cap:
        raise PreconditionError("convolve_and_test",
                                f"kernel L1 mass {l1:g} exceeds cap {l1_cap:g}")
    if max(horizons) > f.T_max - reach + 1e-9:
        raise PreconditionError("convolve_and_test",
                                "horizons reach the zero-padded grid edge")
    return is_pap0(conv, w, horizons, tol, decay_threshold)


@dataclass
class Forcing:
    """``F(t, u) = F1(t, u) + phi(t, u)`` with an AP part and an ergodic part.

    ``lipschitz`` bounds ``|F(t, z1) - F(t, z2)| <= L(t) |z1 - z2|``; it may
    be a number or a callable of ``t``.  Callables take a time array and a
    value array of matching leading dimension.
    """

    ap: object
    ergodic: object = None
    lipschitz: object = None

    def __call__(self, t, u):
        out = np.asarray(self.ap(t, u), dtype=float)
        if self.ergodic is not None:
            out = out + np.asarray(self.ergodic(t, u), dtype=float)
        return out

    def lipschitz_sup(self, probe=np.linspace(-500.0, 500.0, 20001)):
        if self.lipschitz is None:
            raise PreconditionError("compose_and_test", "missing Lipschitz bound")
        if callable(self.lipschitz):
            return float(np.max(np.abs(self.lipschitz(probe))))
        return float(self.lipschitz)


@dataclass
class WpapDecomposition:
    """``h = ap_part + ergodic_part`` relative to ``weight``.

    The split is supplied by the caller; :meth:`validate` checks it.
    """

    ap_part: object
    ergodic_part: object
    weight: object

    def _ergodic(self):
        part = self.ergodic_part
        if isinstance(part, SampledPath):
            return part.interpolant()
        return part

    def __call__(self, t):
        return np.asarray(self.ap_part(t)) + np.asarray(self._ergodic()(t))

    def validate(self, eps, l, horizons=DEFAULT_HORIZONS, **kwargs):
        cert = translation_certificate(self.ap_part, eps, l, **kwargs)
        dev = is_pap0(self.ergodic_part, self.weight, horizons)
        return cert, dev


def compose_and_test(F, h, w=None, horizons=DEFAULT_HORIZONS, tol=DEFAULT_TOL,
                     decay_threshold=DEFAULT_DECAY):
    """PAP_0 decision for ``t -> F(t, h(t)) - F1(t, h1(t))``.

    ``h1`` is the AP part of ``h`` and ``F1`` the AP part of ``F``.  The
    Lipschitz bound of ``F`` must be supplied and uniformly finite.
    """
    L = F.lipschitz_sup()
    if not np.isfinite(L):
        raise PreconditionError("compose_and_test", "Lipschitz bound not finite")
    w = w if w is not None else h.weight
    ap_part = h.ap_part
    ergodic = h._ergodic()

    def remainder(t):
        h1 = np.asarray(ap_part(t))
        full = h1 + np.asarray(ergodic(t))
        return F(t, full) - np.asarray(F.ap(t, h1))

    if isinstance(h.ergodic_part, SampledPath):
        T_top = h.ergodic_part.T_max
        if max(horizons) > T_top:
            raise PreconditionError("compose_and_test",
                                    "horizons exceed the sampled ergodic part")
    return is_pap0(remainder, w, horizons, tol, decay_threshold)


@dataclass
class TransferReport:
    decisions_1: dict
    decisions_2: dict
    agree: bool
    falsifications: list


def equivalence_transfers_pap0(w1, w2, corpus, horizons=DEFAULT_HORIZONS,
                               equivalence_horizons=(500.0, 1000.0, 2000.0),
                               tol=DEFAULT_TOL, decay_threshold=DEFAULT_DECAY):
    """Compare PAP_0 decisions under two equivalent weights.

    ``corpus`` maps names to functions (callables or sampled paths).  Any
    disagreement is reported as a falsification of class equality.
    """
    verdict = weights_equivalent(w1, w2, equivalence_horizons)
    if not verdict.equivalent:
        raise PreconditionError("equivalence_transfers_pap0",
                                "weights are not equivalent")
    d1, d2, bad = {}, {}, []
    for name, fn in corpus.items():
        d1[name] = is_pap0(fn, w1, horizons, tol, decay_threshold).decays_to_zero
        d2[name] = is_pap0(fn, w2, horizons, tol, decay_threshold).decays_to_zero
        if d1[name] != d2[name]:
            bad.append(name)
    return TransferReport(d1, d2, not bad, bad)


def ap_response_path(signal, path_like):
    """Sample an :class:`APSignal` on another path's grid."""
    if not isinstance(signal, APSignal):
        raise PreconditionError("ap_response_path", "need an APSignal")
    return path_like.with_values(signal(path_like.t))
