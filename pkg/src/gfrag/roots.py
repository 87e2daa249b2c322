"""Safeguarded one-dimensional root finding for monotone functions.

Newton steps are taken when they stay inside the current bracket and shrink
the residual fast enough; otherwise the bracket is bisected.  When no
derivative is supplied, an Illinois-modified false-position step plays the
role of the Newton step.
"""
from __future__ import annotations

import math

from .errors import NoConvergence

MAX_ITER = 200
FTOL = 1e-12


def safeguarded_root(f, lo: float, hi: float, df=None, *, ftol: float = FTOL,
                     max_iter: int = MAX_ITER, x0: float | None = None) -> float:
    """Root of ``f`` inside ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign.

    Terminates when ``|f(x)| <= ftol`` or the bracket has collapsed to a few
    ulps.  Raises :class:`NoConvergence` after ``max_iter`` iterations.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"root not bracketed: f({lo})={flo}, f({hi})={fhi}")
    x = 0.5 * (lo + hi) if x0 is None or not lo < x0 < hi else x0
    fx = f(x)
    side = 0
    for _ in range(max_iter):
        if abs(fx) <= ftol:
            return x
        if (fx > 0) == (flo > 0):
            lo, flo = x, fx
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = x, fx
            if side == 1:
                flo *= 0.5
            side = 1
        if hi - lo <= 4 * math.ulp(max(abs(lo), abs(hi))):
            return x
        if df is not None:
            d = df(x)
            step = x - fx / d if d != 0 and math.isfinite(d) else math.nan
        else:
            step = (lo * fhi - hi * flo) / (fhi - flo)
        if not lo < step < hi:
            step = 0.5 * (lo + hi)
        x_new = step
        f_new = f(x_new)
        # a Newton step that fails to halve the residual is replaced by bisection
        if df is not None and abs(f_new) > 0.5 * abs(fx):
            mid = 0.5 * (lo + hi)
            if mid != x_new:
                x_new, f_new = mid, f(mid)
        x, fx = x_new, f_new
    raise NoConvergence(f"no root within {max_iter} iterations (bracket [{lo}, {hi}])")


def expand_right(f, start: float, target: float = 0.0, step: float = 1.0,
                 max_doublings: int = 200) -> float:
    """Smallest tested point ``x >= start`` with ``f(x) >= target`` for increasing ``f``."""
    x = start + step
    for _ in range(max_doublings):
        if f(x) >= target:
            return x
        step *= 2.0
        x = start + step
    raise NoConvergence("could not bracket from the right")
