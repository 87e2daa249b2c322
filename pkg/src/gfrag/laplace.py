"""Numerical inversion of Laplace transforms.

Two independent inverters are provided: the fixed-Talbot contour method
(primary, geometric convergence for transforms analytic off the negative
real axis) and the Gaver--Stehfest method evaluated on the real axis only.
Disagreement between the two is used as a smoothness/pole diagnostic.
"""
from __future__ import annotations

from functools import lru_cache

import mpmath
import numpy as np

from .errors import InversionError

TALBOT_NODES = 32
STEHFEST_TERMS = 36


def talbot(F, t, n_nodes: int = TALBOT_NODES, shift: float = 0.0):
    """Fixed-Talbot inversion of ``F`` at the positive times ``t``.

    ``F`` must accept a complex ndarray and return values of the same shape.
    ``shift`` moves the contour right by a real abscissa, which is needed when
    ``F`` has singularities with positive real part.
    Node values that overflow are dropped; an :class:`InversionError` is raised
    if a dropped node carries a non-negligible contour weight.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("Talbot inversion requires t > 0")
    M = n_nodes
    theta = np.pi * np.arange(1, M) / M
    cot = 1.0 / np.tan(theta)
    r = 2.0 * M / (5.0 * t)                      # (nt,)
    s = r[:, None] * theta[None, :] * (cot[None, :] + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        Fs = np.asarray(F(s + shift), dtype=complex)
        F0 = np.asarray(F(r.astype(complex) + shift), dtype=complex)
        weight = np.exp(t[:, None] * s) * (1.0 + 1j * sigma[None, :])
        terms = (weight * Fs).real
    bad = ~np.isfinite(terms)
    if np.any(bad):
        # only far-left nodes may overflow; their weights are ~exp(-|Re s| t)
        if np.any(np.abs(weight[bad]) > 1e-30) or not np.all(np.isfinite(F0)):
            raise InversionError("transform is not finite on the Talbot contour")
        terms = np.where(bad, 0.0, terms)
    head = 0.5 * np.exp(r * t) * F0.real
    out = (r / M) * (head + terms.sum(axis=1))
    return np.exp(shift * t) * out


@lru_cache(maxsize=None)
def _stehfest_weights(N: int, dps: int):
    half = N // 2
    fac = mpmath.factorial
    V = []
    for k in range(1, N + 1):
        acc = mpmath.mpf(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += (mpmath.mpf(j) ** half * fac(2 * j)
                    / (fac(half - j) * fac(j) * fac(j - 1) * fac(k - j) * fac(2 * j - k)))
        V.append((-1) ** (k + half) * acc)
    return tuple(V)


def gaver_stehfest(F, t, n_terms: int = STEHFEST_TERMS, shift: float = 0.0,
                   dps: int | None = None):
    """Gaver--Stehfest inversion with ``F`` evaluated in mpmath precision.

    The Stehfest weights grow like ``10**(0.4 n_terms)``, so both the transform
    values and the alternating sum are carried at ``dps`` digits (default
    ``2.2 * n_terms + 10``).  ``F`` must therefore accept mpmath reals.
    """
    if n_terms % 2:
        raise ValueError("n_terms must be even")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("Stehfest inversion requires t > 0")
    if dps is None:
        dps = int(2.2 * n_terms) + 10
    out = np.empty_like(t)
    with mpmath.workdps(dps):
        V = _stehfest_weights(n_terms, dps)
        ln2 = mpmath.log(2)
        for i, ti in enumerate(t):
            tm = mpmath.mpf(float(ti))
            acc = mpmath.fsum(V[k - 1] * F(k * ln2 / tm + shift) for k in range(1, n_terms + 1))
            out[i] = float(acc * ln2 / tm * mpmath.exp(shift * tm))
    return out


def invert(F, t, *, shift: float = 0.0, rtol: float = 1e-5, atol: float = 0.0,
           n_nodes: int = TALBOT_NODES, n_terms: int = STEHFEST_TERMS, check: bool = True):
    """Talbot inversion cross-checked against Gaver--Stehfest.

    ``F`` must accept complex ndarrays (Talbot) and mpmath reals
    (Stehfest).  Raises :class:`InversionError` when the two disagree beyond
    ``rtol`` relative (plus ``atol`` absolute).
    """
    primary = talbot(F, t, n_nodes=n_nodes, shift=shift)
    if check:
        other = gaver_stehfest(F, t, n_terms=n_terms, shift=shift)
        err = np.abs(primary - other)
        if np.any(err > rtol * np.abs(primary) + atol):
            worst = int(np.argmax(err - rtol * np.abs(primary)))
            raise InversionError(
                f"Talbot/Stehfest disagreement {err[worst]:.3e} at t={np.atleast_1d(t)[worst]:g} "
                f"(values {primary[worst]:.10g} vs {other[worst]:.10g})")
    return primary
