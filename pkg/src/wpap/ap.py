"""Almost periodic signals as finite trigonometric polynomials.

An :class:`APSignal` stores a list of distinct frequencies ``lambda_k`` and
complex (possibly vector) coefficients ``c_k`` and evaluates

    f(t) = sum_k c_k exp(i lambda_k t).

Real signals carry conjugate-symmetric coefficients and evaluate to real
arrays.  General almost periodic functions enter the package only as
sampled paths together with an epsilon-translation certificate.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import PreconditionError
from .quadrature import integrate

_FREQ_TOL = 1e-12


class APSignal:
    """Finite trigonometric sum ``sum_k c_k exp(i lambda_k t)``.

    Parameters
    ----------
    frequencies : array_like, shape (k,)
        Distinct real frequencies.
    coefficients : array_like, shape (k,) or (k, dim)
        Complex coefficients; a 1-D array gives a scalar signal.
    real : bool
        Require conjugate symmetry ``c(-lambda) = conj(c(lambda))`` and
        return real values.
    """

    def __init__(self, frequencies, coefficients, real=False):
        freqs = np.atleast_1d(np.asarray(frequencies, dtype=float))
        coeffs = np.asarray(coefficients, dtype=complex)
        self.vector = coeffs.ndim == 2
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if freqs.ndim != 1 or coeffs.ndim != 2 or len(coeffs) != freqs.size:
            raise PreconditionError("APSignal",
                                    "need one coefficient per frequency")
        order = np.argsort(freqs, kind="stable")
        freqs, coeffs = freqs[order], coeffs[order]
        if freqs.size > 1 and np.min(np.diff(freqs)) <= _FREQ_TOL:
            raise PreconditionError("APSignal", "frequencies must be distinct")
        self.frequencies = freqs
        self.coefficients = coeffs
        self.real = bool(real)
        if self.real and not self._conjugate_symmetric():
            raise PreconditionError("APSignal",
                                    "real signal needs conjugate-symmetric terms")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, dim=None):
        shape = (0,) if dim is None else (0, dim)
        return cls(np.empty(0), np.empty(shape), real=True)

    @classmethod
    def constant(cls, c):
        c = np.asarray(c, dtype=float)
        coeffs = c.reshape(1, -1) if c.ndim else np.array([complex(c)])
        return cls([0.0], coeffs, real=True)

    @classmethod
    def cos(cls, freq=1.0, amp=1.0, phase=0.0):
        """``amp * cos(freq t + phase)``."""
        if freq == 0:
            return cls.constant(amp * np.cos(phase))
        c = 0.5 * amp * np.exp(1j * phase)
        return cls([-freq, freq], [np.conj(c), c], real=True)

    @classmethod
    def sin(cls, freq=1.0, amp=1.0):
        """``amp * sin(freq t)``."""
        return cls.cos(freq, amp, -np.pi / 2)

    @classmethod
    def from_terms(cls, terms, real=False):
        """Build from ``(frequency, re, im)`` triples.

        With ``real=True`` the mirror term of every non-zero frequency is
        added when absent.
        """
        terms = [tuple(map(float, tr)) for tr in terms]
        table = {}
        for f, re, im in terms:
            key = round(f, 12)
            table[key] = table.get(key, 0.0) + complex(re, im)
        if real:
            for key in list(table):
                mirror = round(-key, 12)
                if mirror not in table:
                    table[mirror] = np.conj(table[key])
        freqs = np.array(sorted(table), dtype=float)
        coeffs = np.array([table[round(f, 12)] for f in freqs])
        return cls(freqs, coeffs, real=real)

    # -- algebra ----------------------------------------------------------
    def _conjugate_symmetric(self):
        for f, c in zip(self.frequencies, self.coefficients):
            j = np.flatnonzero(np.abs(self.frequencies + f) <= 1e-9)
            if j.size != 1 or not np.allclose(self.coefficients[j[0]],
                                              np.conj(c), atol=1e-12):
                return False
        return True

    @property
    def dim(self):
        return self.coefficients.shape[1]

    def __add__(self, other):
        if not isinstance(other, APSignal):
            other = APSignal.constant(other)
        freqs = np.concatenate((self.frequencies, other.frequencies))
        coeffs = np.concatenate((self.coefficients, other.coefficients))
        keys = np.round(freqs, 12)
        uniq, inv = np.unique(keys, return_inverse=True)
        merged = np.zeros((uniq.size, coeffs.shape[1]), dtype=complex)
        np.add.at(merged, inv, coeffs)
        freqs_out = np.array([freqs[inv == k][0] for k in range(uniq.size)])
        out = APSignal(freqs_out, merged if (self.vector or other.vector)
                       else merged[:, 0], real=self.real and other.real)
        return out

    __radd__ = __add__

    def __mul__(self, scalar):
        scalar = complex(scalar)
        real = self.real and scalar.imag == 0
        return APSignal(self.frequencies,
                        self.coefficients * scalar if self.vector
                        else self.coefficients[:, 0] * scalar, real=real)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    # -- evaluation -------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * np.multiply.outer(t, self.frequencies))
        vals = phase @ self.coefficients
        if self.real:
            vals = vals.real
        if not self.vector:
            vals = vals[..., 0]
        return vals

    eval = __call__

    def sup_bound(self):
        """Upper bound of the sup-norm over the real line."""
        return float(np.sum(np.linalg.norm(self.coefficients, axis=1)))

    def lipschitz_bound(self):
        return float(np.sum(np.abs(self.frequencies)
                            * np.linalg.norm(self.coefficients, axis=1)))

    def defect_bound(self, tau):
        """Upper bound of ``sup_t |f(t + tau) - f(t)|`` over all real t."""
        tau = np.asarray(tau, dtype=float)
        mags = np.linalg.norm(self.coefficients, axis=1)
        return np.abs(np.exp(1j * np.multiply.outer(tau, self.frequencies))
                      - 1.0) @ mags

    def coefficient(self, lam):
        """Stored coefficient at frequency ``lam`` (zero when absent)."""
        j = np.flatnonzero(np.abs(self.frequencies - lam) <= 1e-9)
        if j.size == 0:
            return np.zeros(self.dim, dtype=complex) if self.vector else 0j
        c = self.coefficients[j[0]]
        return c if self.vector else c[0]

    def integral(self, t, s):
        """``int_s^t f(r) dr`` in closed form (scalar signals)."""
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        total = np.zeros(np.broadcast(t, s).shape, dtype=complex)
        for f, c in zip(self.frequencies, self.coefficients[:, 0]):
            if abs(f) <= _FREQ_TOL:
                total = total + c * (t - s)
            else:
                total = total + c * (np.exp(1j * f * t)
                                     - np.exp(1j * f * s)) / (1j * f)
        return total.real if self.real else total

    def convolve(self, kernel, support, panel_width=0.05):
        """Exact AP representation of ``int f(t - s) kernel(s) ds``.

        Each coefficient is multiplied by the kernel's Fourier transform at
        its frequency, which is computed by quadrature over ``support``.
        """
        a, b = support
        hat = []
        for f in self.frequencies:
            val, _ = integrate(lambda s: kernel(s) * np.exp(-1j * f * s), a, b,
                               panel_width=panel_width)
            hat.append(val)
        coeffs = self.coefficients * np.asarray(hat)[:, None]
        coeffs = coeffs if self.vector else coeffs[:, 0]
        out = APSignal(self.frequencies, coeffs, real=False)
        # a real kernel keeps the coefficients conjugate-symmetric
        if self.real and out._conjugate_symmetric():
            out.real = True
        return out

    def to_terms(self):
        """Literal ``(frequency, re, im)`` triples for a scalar signal."""
        return [(float(f), float(c.real), float(c.imag))
                for f, c in zip(self.frequencies, self.coefficients[:, 0])]

    def __repr__(self):
        return (f"APSignal({len(self.frequencies)} terms, dim={self.dim}, "
                f"real={self.real})")


@dataclass
class TranslationCertificate:
    epsilon: float
    window_length: float
    found_taus: list
    defects: list
    passed: bool
    windows: list = field(default_factory=list)


def _as_function(f, t_range):
    """Callable, Lipschitz estimate and admissible t-range for ``f``."""
    from .pap import SampledPath  # local import: pap depends on ap

    if isinstance(f, SampledPath):
        spline = CubicSpline(f.t, f.values, axis=0)
        slopes = np.abs(np.diff(f.values, axis=0)) / f.step
        lip = 1.1 * float(np.max(np.linalg.norm(slopes.reshape(len(slopes), -1),
                                                axis=1)))
        return spline, lip, (f.t[0], f.t[-1])
    lo, hi = t_range
    t = np.linspace(lo, hi, int(round((hi - lo) / 1e-3)) + 1)
    vals = np.asarray(f(t))
    slopes = np.abs(np.diff(vals, axis=0)) / (t[1] - t[0])
    lip = 1.5 * float(np.max(np.linalg.norm(slopes.reshape(len(slopes), -1),
                                            axis=1)))
    return f, lip, (-np.inf, np.inf)


def translation_certificate(f, eps, l, scan_range=None, t_range=(-50.0, 50.0),
                            tau_step=None, t_step=None, lipschitz=None):
    """Check that every window of length ``l`` holds an eps-translation number.

    For an :class:`APSignal` the defect ``sup_t |f(t+tau) - f(t)|`` is
    replaced by its closed-form upper bound over the whole real line, so a
    pass is a proof for the sampled shifts.  Other inputs (callables or
    :class:`wpap.pap.SampledPath`) are sampled on a t grid of step at most
    ``eps / (4 L)`` with ``L`` a Lipschitz bound.

    Parameters
    ----------
    f : APSignal, callable or SampledPath
    eps, l : float
        Tolerance and window length.
    scan_range : (float, float)
        Shifts scanned; must cover at least five windows.  Defaults to
        ``(0, 5 l)``.
    """
    if not (eps > 0 and l > 0):
        raise PreconditionError("translation_certificate",
                                "eps and l must be positive")
    if scan_range is None:
        scan_range = (0.0, 5.0 * l)
    a, b = map(float, scan_range)
    nwin = int(np.floor((b - a) / l + 1e-9))
    if nwin < 5:
        raise PreconditionError("translation_certificate",
                                "scan range must cover at least 5 windows")

    if isinstance(f, APSignal):
        lip = f.lipschitz_bound()
        if tau_step is None:
            tau_step = eps / (2.0 * lip) if lip > 0 else l / 8
        if lip > 0 and tau_step > eps / lip:
            raise PreconditionError("translation_certificate",
                                    "shift grid coarser than eps / Lipschitz")
        taus, defects, windows = [], [], []
        ok = True
        for k in range(nwin):
            lo = a + k * l
            grid = np.arange(lo, lo + l, tau_step)
            d = f.defect_bound(grid)
            j = int(np.argmin(d))
            taus.append(float(grid[j]))
            defects.append(float(d[j]))
            windows.append((lo, lo + l))
            ok = ok and d[j] < eps
        return TranslationCertificate(eps, l, taus, defects, bool(ok), windows)

    func, lip_est, support = _as_function(f, t_range)
    lip = lipschitz if lipschitz is not None else lip_est
    if t_step is None:
        t_step = eps / (4.0 * lip)
    if tau_step is None:
        tau_step = eps / (2.0 * lip)
    if lip is not None and lip > 0 and tau_step > eps / lip:
        raise PreconditionError("translation_certificate",
                                "shift grid coarser than eps / Lipschitz")
    t_lo = max(t_range[0], support[0] - min(a, 0.0))
    t_hi = min(t_range[1], support[1] - max(b, 0.0))
    if t_hi <= t_lo:
        raise PreconditionError("translation_certificate",
                                "sample range too short for the scan")
    tt = np.arange(t_lo, t_hi, t_step)
    coarse = tt[::16]
    base = np.asarray(func(tt))
    base_coarse = base[::16]

    def defect(tau, pts, ref):
        diff = np.asarray(func(pts + tau)) - ref
        if diff.ndim > 1:
            diff = np.linalg.norm(diff.reshape(len(pts), -1), axis=1)
        return float(np.max(np.abs(diff)))

    taus, defects, windows = [], [], []
    ok = True
    for k in range(nwin):
        lo = a + k * l
        grid = np.arange(lo, lo + l, tau_step)
        rough = np.array([defect(tau, coarse, base_coarse) for tau in grid])
        best_tau, best = float(grid[np.argmin(rough)]), np.inf
        # the coarse defect is a lower bound, so only candidates below eps
        # can pass; verify them on the fine grid in order of promise
        for j in np.argsort(rough):
            if rough[j] >= eps:
                break
            d = defect(grid[j], tt, base)
            if d < best:
                best, best_tau = d, float(grid[j])
            if d < eps:
                break
        if not np.isfinite(best):
            best = float(np.min(rough))
        taus.append(best_tau)
        defects.append(best)
        windows.append((lo, lo + l))
        ok = ok and best < eps
    return TranslationCertificate(eps, l, taus, defects, bool(ok), windows)


def find_window_length(f, eps, l0=1.0, l_max=4096.0, **kwargs):
    """Passing certificate for the smallest ``l = l0 * 2**k``, or ``None``."""
    l = float(l0)
    while l <= l_max:
        cert = translation_certificate(f, eps, l, **kwargs)
        if cert.passed:
            return cert
        l *= 2.0
    return None


def bohr_coefficient(f, lam, T, panel_width=0.5, order=8):
    """``(1/2T) int_{-T}^{T} f(t) exp(-i lam t) dt`` by quadrature."""
    if not T > 0:
        raise PreconditionError("bohr_coefficient", "T must be positive")

    def integrand(t):
        vals = np.asarray(f(t))
        phase = np.exp(-1j * lam * t)
        return vals * (phase if vals.ndim == 1 else phase[:, None])

    val, _ = integrate(integrand, -T, T, panel_width=panel_width, order=order)
    return val / (2.0 * T)
