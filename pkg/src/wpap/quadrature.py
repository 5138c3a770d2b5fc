"""Composite Gauss-Legendre rules and a weakly singular panel rule."""

import math

import numpy as np
from scipy import special


def gauss_legendre(order):
    """Nodes and weights of the ``order``-point rule on [-1, 1]."""
    return special.roots_legendre(order)


def panel_nodes(a, b, panel_width=0.5, order=8):
    """Nodes and weights of the composite rule on [a, b].

    The interval is split into equal panels no wider than ``panel_width``.

    Returns
    -------
    nodes, weights : numpy.ndarray
        Flat arrays of length ``npanels * order``.
    """
    if b <= a:
        return np.empty(0), np.empty(0)
    npanels = max(1, int(math.ceil((b - a) / panel_width - 1e-12)))
    x, w = gauss_legendre(order)
    edges = np.linspace(a, b, npanels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def integrate(func, a, b, panel_width=0.5, order=8):
    """Composite Gauss-Legendre integral of a vectorised ``func``.

    The error estimate is the difference against the same rule on panels
    of half the width.

    Returns
    -------
    value : float or numpy.ndarray
    error : float
    """
    nodes, weights = panel_nodes(a, b, panel_width, order)
    value = np.tensordot(weights, np.asarray(func(nodes)), axes=(0, 0))
    nodes2, weights2 = panel_nodes(a, b, panel_width / 2, order)
    fine = np.tensordot(weights2, np.asarray(func(nodes2)), axes=(0, 0))
    return fine, float(np.max(np.abs(fine - value)))


def singular_integral(func, a, b, alpha, order=16):
    """Integral of ``(b - s)**(-alpha) * func(s)`` over [a, b].

    The substitution ``v = (b - s)**(1 - alpha)`` turns the integrand
    into a smooth one, ``func(b - v**(1/(1-alpha))) / (1 - alpha)``, which
    is then handled by a plain Gauss-Legendre rule on
    ``[0, (b - a)**(1 - alpha)]``.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    vmax = (b - a) ** (1.0 - alpha)
    x, w = gauss_legendre(order)
    v = 0.5 * vmax * (x + 1.0)
    s = b - v ** (1.0 / (1.0 - alpha))
    vals = np.asarray(func(s))
    return 0.5 * vmax * np.tensordot(w, vals, axes=(0, 0)) / (1.0 - alpha)


def singular_kernel_integral(alpha, rate, length=np.inf, panels=None):
    """``int_0^length tau**(-alpha) exp(-rate tau) dtau``.

    The panel touching zero uses :func:`singular_integral`; the rest uses
    composite Gauss-Legendre.  With ``length=inf`` the tail past
    ``60/rate`` is dropped (it is below ``exp(-60)`` in relative size).
    """
    if not np.isfinite(length):
        length = 60.0 / rate
    first = min(1.0, length)
    # tau = first - s puts the singularity at the right endpoint
    head = singular_integral(lambda s: np.exp(-rate * (first - s)), 0.0, first,
                             alpha)
    if length <= first:
        return float(head)
    tail, _ = integrate(lambda t: t ** (-alpha) * np.exp(-rate * t), first,
                        length, panel_width=panels or 0.5)
    return float(head + tail)


def gamma_kernel_integral(alpha, rate):
    """Closed form of ``int_0^inf tau**(-alpha) exp(-rate tau) dtau``."""
    return math.gamma(1.0 - alpha) * rate ** (alpha - 1.0)
