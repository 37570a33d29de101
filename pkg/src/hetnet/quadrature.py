"""Quadrature helpers: adaptive QUADPACK wrappers and fixed Gauss-Legendre rules."""

import functools
import warnings

import numpy as np
from scipy import integrate as _integrate

from .errors import ConvergenceError

EPSREL = 1e-8
EPSABS = 1e-12


def integrate(f, a, b=np.inf, points=(), scale=1.0, epsrel=EPSREL, epsabs=EPSABS, limit=200):
    """Adaptive Gauss-Kronrod integral of a scalar function over ``[a, b]``.

    The interval is split at ``points`` (kinks of the integrand).  An infinite
    upper piece ``[c, inf)`` is mapped onto ``[0, 1)`` with
    ``u = c + scale * t / (1 - t)``.

    Returns
    -------
    value, error : float
        Integral and summed absolute error estimate.

    Raises
    ------
    ConvergenceError
        If any piece fails to converge; ``achieved`` holds its error estimate.
    """
    cuts = sorted({float(p) for p in points if a < p < b})
    edges = [a, *cuts, b]
    total = err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(hi):
            def mapped(t, lo=lo):
                one_minus = 1.0 - t
                if one_minus <= 0.0:
                    # the point at infinity; integrable tails vanish there
                    return 0.0
                return f(lo + scale * t / one_minus) * scale / (one_minus * one_minus)
            val, e = _quad(mapped, 0.0, 1.0, epsrel, epsabs, limit)
        else:
            val, e = _quad(f, lo, hi, epsrel, epsabs, limit)
        total += val
        err += e
    return total, err


def _quad(f, lo, hi, epsrel, epsabs, limit):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _integrate.IntegrationWarning)
        out = _integrate.quad(f, lo, hi, epsrel=epsrel, epsabs=epsabs, limit=limit, full_output=1)
    val, err, info = out[:3]
    if len(out) > 3 and err > max(epsabs, epsrel * abs(val)) * 10:
        raise ConvergenceError(
            f"quadrature on [{lo:g}, {hi:g}] did not converge: {out[3].splitlines()[0]}",
            achieved=err,
        )
    if not np.isfinite(val):
        raise ConvergenceError(f"quadrature on [{lo:g}, {hi:g}] is not finite", achieved=np.inf)
    return val, err


@functools.lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the ``n``-point rule on ``[-1, 1]`` (read-only)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_nodes(edges, panels_per_piece, n):
    """Composite Gauss-Legendre nodes over consecutive ``edges``.

    Every interval between edges is cut into ``panels_per_piece`` equal panels
    carrying an ``n``-point rule.
    """
    x, w = gauss_legendre(n)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        cuts = np.linspace(lo, hi, panels_per_piece + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[:-1] + cuts[1:])
        nodes.append((mid[:, None] + half[:, None] * x).ravel())
        weights.append((half[:, None] * w).ravel())
    if not nodes:
        return np.empty(0), np.empty(0)
    return np.concatenate(nodes), np.concatenate(weights)
