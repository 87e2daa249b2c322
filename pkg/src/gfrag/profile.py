"""Asymptotic size profile of the growth-fragmentation population.

On the log scale ``y = log x`` the profile is (up to normalisation) the
invariant density ``m_bar`` of the tilted process.  Above 0 it is the
exponential ``exp(-beta_plus y) / a_plus``.  Below 0, ``m_tilde(y) =
m_bar(-y)`` is known through its Laplace transform

    L(m_tilde)(q) = psi_eta_plus(q) / (a_plus psi_eta_minus(q) (q - beta_plus)),

which is inverted numerically (fixed Talbot, cross-checked by
Gaver-Stehfest) unless the kernel is monomial, where it reduces to
``exp(-beta_minus y) / a_minus``.  For large ``y`` the inversion is
replaced by the Cramer asymptote ``C exp(-beta_minus y)``.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from . import laplace
from .errors import DomainError, InversionError, RegimeError
from .kernel import FragmentationKernel, ModelParams, MonomialKernel, _is_mp
from .spectral import (ETA, XI, LaplaceExponent, Regime, RegimeReport, exponents,
                       malthus)

Y_RELIABLE = 30.0          # largest y at which raw inversion output is trusted
CROSSOVER_RTOL = 5e-3
CROSSOVER_WINDOW = 1.0
INVERSION_RTOL = 1e-5
INVERSION_ATOL = 1e-9


# -- scale functions -------------------------------------------------------------
def _reciprocal(exp: LaplaceExponent):
    def F(q):
        if _is_mp(q):
            return 1 / exp.psi(q)
        with np.errstate(all="ignore"):
            v = 1.0 / exp.psi(q)
        # psi overflows far left on the contour, where 1/psi is negligible
        return np.where(np.isfinite(v), v, 0.0)
    return F


def scale_function(exp: LaplaceExponent, x, *, check: bool = True):
    """Scale function ``W`` with ``int_0^inf exp(-q x) W(x) dx = 1 / psi(q)``.

    ``exp`` should be of the ``Eta`` family (any spectrally negative
    exponent works).  ``W(x) = 0`` for ``x < 0`` and ``W(0) = 1 / drift``.
    """
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros_like(x_arr)
    out[x_arr == 0] = 1.0 / exp.drift
    pos = x_arr > 0
    if np.any(pos):
        phi0 = exp.right_inverse(0.0)
        shift = phi0 if phi0 > 0 else 0.0
        F = _reciprocal(exp)
        out[pos] = laplace.invert(F, x_arr[pos], shift=shift, check=check,
                                  rtol=INVERSION_RTOL, atol=INVERSION_ATOL / exp.drift)
    return out if np.ndim(x) else float(out[0])


def two_sided_exit(exp: LaplaceExponent, x: float, a: float) -> float:
    """Probability that the process started at ``x`` exceeds ``a`` before going below 0."""
    if not 0 <= x <= a:
        raise DomainError("need 0 <= x <= a")
    if x == a:
        return 1.0
    w = scale_function(exp, np.array([x, a]))
    return float(w[0] / w[1])


# -- transforms and constants ----------------------------------------------------
def _eta(params: ModelParams, kernel: FragmentationKernel):
    return exponents(params, kernel, ETA)


@lru_cache(maxsize=64)
def _beta_plus_mp(kernel, a_plus: float, beta_plus: float, dps: int):
    # the removable pole at beta_plus only cancels if the root is exact to working precision
    ep = LaplaceExponent(a_plus, ETA, kernel)
    with mpmath.workdps(dps):
        return mpmath.findroot(ep.psi, mpmath.mpf(beta_plus), tol=mpmath.mpf(10) ** (-dps + 5))


def mtilde_transform(params: ModelParams, kernel: FragmentationKernel, q,
                     beta_plus: float | None = None, beta_minus: float | None = None):
    """Laplace transform of ``m_tilde`` at real, complex or mpmath ``q``.

    The removable singularities at ``q = 0`` and ``q = beta_plus`` are filled
    by their limits for real arguments.
    """
    ep, em = _eta(params, kernel)
    if beta_plus is None:
        beta_plus = ep.right_inverse(0.0)
    ap = params.a_plus
    if _is_mp(q):
        bp = _beta_plus_mp(kernel, params.a_plus, float(beta_plus), mpmath.mp.dps)
        return ep.psi(q) / (ap * em.psi(q) * (q - bp))
    if isinstance(q, np.ndarray) and np.iscomplexobj(q):
        with np.errstate(all="ignore"):
            pm = em.psi(q)
            ratio = 1.0 + (params.a_plus - params.a_minus) * q / pm
            ratio = np.where(np.isfinite(pm), ratio, 1.0)
            return ratio / (ap * (q - beta_plus))
    q = float(q)
    if beta_minus is not None and q <= -beta_minus:
        raise DomainError(f"transform diverges for q <= -beta_minus = {-beta_minus}")
    if q <= em.lower or (em.lower_inclusive and q < em.lower):
        raise DomainError("q outside the finiteness domain of the lower exponent")
    h = 1e-7 * max(1.0, abs(beta_plus))
    if abs(q) < h:
        return ep.psi_prime(0.0) / (ap * em.psi_prime(0.0) * (-beta_plus))
    if abs(q - beta_plus) < h:
        return ep.psi_prime(beta_plus) / (ap * em.psi(beta_plus))
    return ep.psi(q) / (ap * em.psi(q) * (q - beta_plus))


def cramer_constant(params: ModelParams, kernel: FragmentationKernel,
                    report: RegimeReport | None = None) -> float:
    """Constant ``C`` in ``m_tilde(y) ~ C exp(-beta_minus y)``."""
    if params.is_linear:
        return 0.0
    report = report or malthus(params, kernel)
    if report.regime is not Regime.STRICT or report.beta_minus is None:
        raise RegimeError("the Cramer constant needs the strict regime and a Cramer root")
    bm, bp = report.beta_minus, report.beta_plus
    _, em = _eta(params, kernel)
    return -(params.a_minus - params.a_plus) * bm / (
        params.a_plus * em.psi_prime(-bm) * (bm + bp))


def total_mass(params: ModelParams, kernel: FragmentationKernel,
               report: RegimeReport | None = None) -> float:
    """Total mass of the unnormalised invariant measure ``m``.

    Uses ``beta_plus`` in place of ``phi_plus(psi_plus(-1)) + 1`` (the two
    coincide); the spectral module evaluates the other form.
    """
    report = report or malthus(params, kernel)
    if report.regime is not Regime.STRICT:
        raise RegimeError(f"total mass is infinite or undefined in regime {report.regime.value}")
    if params.is_linear:
        raise RegimeError("linear growth has no strict regime")
    _, xm = exponents(params, kernel, XI)
    return (params.a_minus - params.a_plus) / params.a_plus / xm.psi_prime(-1.0) / report.beta_plus


def m_bar_upper(params: ModelParams, kernel: FragmentationKernel, y):
    """Unnormalised invariant density on ``y >= 0``: ``exp(-beta_plus y) / a_plus``."""
    ep, _ = _eta(params, kernel)
    if ep.psi_prime(0.0) >= 0:
        raise RegimeError("upper branch is not recurrent (no positive beta_plus)")
    bp = ep.right_inverse(0.0)
    return np.exp(-bp * np.asarray(y, dtype=float)) / params.a_plus


def mtilde_numeric(params: ModelParams, kernel: FragmentationKernel, y, *,
                   beta_plus: float | None = None, check: bool = True,
                   n_nodes: int = laplace.TALBOT_NODES, rtol: float = INVERSION_RTOL):
    """``m_tilde(y)`` by inverting :func:`mtilde_transform` (any kernel)."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr <= 0):
        raise DomainError("m_tilde is evaluated at y > 0")
    if beta_plus is None:
        beta_plus = _eta(params, kernel)[0].right_inverse(0.0)
    F = lambda q: mtilde_transform(params, kernel, q, beta_plus=beta_plus)
    out = laplace.invert(F, y_arr, check=check, n_nodes=n_nodes, rtol=rtol,
                         atol=INVERSION_ATOL / params.a_minus)
    return out if np.ndim(y) else float(out[0])


def mtilde_double_integral(params: ModelParams, kernel: FragmentationKernel, y: float,
                           n_u: int = 64) -> float:
    """Slow cross-check of ``m_tilde(y)`` from the lower scale function.

    Evaluates ``W(y) - (1/a_plus) int_0^y W(u) e^(u-y) int_0^inf e^(-(beta_plus+1) x)
    rho(e^(u-y-x)) dx du`` with ``W`` the lower tilted scale function.
    """
    ep, em = _eta(params, kernel)
    bp = ep.right_inverse(0.0)
    nodes, weights = np.polynomial.legendre.leggauss(n_u)
    u = 0.5 * y * (nodes + 1.0)
    W = scale_function(em, u, check=False)

    def inner(ui):
        f = lambda x: math.exp(-(bp + 1.0) * x) * float(kernel.density(math.exp(ui - y - x)))
        return integrate.quad(f, 0.0, np.inf, limit=200, epsabs=1e-13, epsrel=1e-11)[0]

    I = np.array([inner(ui) for ui in u]) * np.exp(u - y)
    conv = 0.5 * y * np.dot(weights, W * I)
    return float(scale_function(em, y, check=False)) - conv / params.a_plus


# -- the profile -----------------------------------------------------------------
@dataclass(frozen=True)
class ClosedFormMonomial:
    c3: float


@dataclass(frozen=True)
class NumericTable:
    y: np.ndarray
    values: np.ndarray
    y_switch: float | None     # beyond this the Cramer asymptote is used
    heuristic_tail: bool = True


@dataclass(frozen=True, eq=False)
class ProfileDensity:
    params: ModelParams
    kernel: FragmentationKernel
    report: RegimeReport
    beta_plus: float
    beta_minus: float | None
    total_mass: float
    c1: float
    c2: float | None
    c3: float
    cramer: float | None
    body: ClosedFormMonomial | NumericTable = field(repr=False)

    @property
    def lambda_star(self) -> float:
        return self.report.lambda_star

    def constants(self) -> dict:
        return {
            "lambda": self.lambda_star,
            "beta_plus": self.beta_plus,
            "beta_minus": self.beta_minus,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "C": self.cramer,
            "total_mass": self.total_mass,
        }


def _find_crossover(y, inv, asym) -> float | None:
    ok = np.abs(inv / asym - 1.0) < CROSSOVER_RTOL
    dy = y[1] - y[0]
    width = int(round(CROSSOVER_WINDOW / dy)) + 1
    for i in range(len(y) - width + 1):
        if ok[i:i + width].all():
            return float(y[i])
    return None


def build_profile(params: ModelParams, kernel: FragmentationKernel, *,
                  numeric_body: bool | None = None, y_scan: float = Y_RELIABLE,
                  n_scan: int = 301, check: bool = True,
                  inversion_rtol: float = INVERSION_RTOL) -> ProfileDensity:
    """Assemble the normalised profile; strict Malthusian regime only.

    ``numeric_body`` forces (True) or forbids (False) the Laplace-inversion
    route for the body; by default it is used for non-monomial kernels.
    """
    report = malthus(params, kernel)
    if report.regime is not Regime.STRICT:
        raise RegimeError(f"profile normalisation needs the strict regime, got {report.regime.value}")
    mass = total_mass(params, kernel, report)
    c1 = 1.0 / mass
    bm = report.beta_minus
    C = cramer_constant(params, kernel, report) if bm is not None else None
    if numeric_body is None:
        numeric_body = not isinstance(kernel, MonomialKernel)
    if not numeric_body:
        if not isinstance(kernel, MonomialKernel):
            raise DomainError("closed-form body only exists for monomial kernels")
        body = ClosedFormMonomial(c1)
    else:
        y = np.linspace(y_scan / (n_scan - 1), y_scan, n_scan)
        vals = mtilde_numeric(params, kernel, y, beta_plus=report.beta_plus, check=False)
        if check:
            # spot-check the contour inversion against Stehfest on a few points
            idx = np.unique(np.linspace(0, n_scan - 1, 6).astype(int)[:-1])
            mtilde_numeric(params, kernel, y[idx], beta_plus=report.beta_plus, check=True,
                           rtol=inversion_rtol)
        y_switch = None
        if C is not None:
            y_switch = _find_crossover(y, vals, C * np.exp(-bm * y))
        body = NumericTable(y, vals, y_switch, heuristic_tail=True)
    return ProfileDensity(params, kernel, report, report.beta_plus, bm, mass, c1,
                          None if C is None else C / mass, c1, C, body)


def mtilde(profile: ProfileDensity, y):
    """Unnormalised density of the tilted log-size below 0, at depth ``y > 0``."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(y_arr <= 0):
        raise DomainError("m_tilde is evaluated at y > 0")
    body = profile.body
    if isinstance(body, ClosedFormMonomial):
        out = np.exp(-profile.beta_minus * y_arr) / profile.params.a_minus
    else:
        out = np.empty_like(y_arr)
        ys = body.y_switch
        far = y_arr >= ys if ys is not None else np.zeros(y_arr.shape, bool)
        if ys is None and np.any(y_arr > Y_RELIABLE):
            raise RegimeError("no Cramer asymptote and y beyond the reliable inversion range")
        if np.any(far):
            out[far] = profile.cramer * np.exp(-profile.beta_minus * y_arr[far])
        if np.any(~far):
            out[~far] = mtilde_numeric(profile.params, profile.kernel, y_arr[~far],
                                       beta_plus=profile.beta_plus, check=False)
    return out if np.ndim(y) else float(out[0])


def density_tail(profile: ProfileDensity, x):
    """Normalised density on ``x >= 1``: ``(c1 / a_plus) x**-(1 + beta_plus)``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 1):
        raise DomainError("tail branch is defined on x >= 1")
    return profile.c1 / profile.params.a_plus * x_arr ** -(1.0 + profile.beta_plus)


def nu(profile: ProfileDensity, x):
    """Normalised profile density; ``x = 1`` belongs to the tail branch."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr <= 0):
        raise DomainError("nu is defined on x > 0")
    out = np.empty_like(x_arr)
    up = x_arr >= 1
    out[up] = density_tail(profile, x_arr[up])
    if np.any(~up):
        xb = x_arr[~up]
        out[~up] = mtilde(profile, -np.log(xb)) / (xb * profile.total_mass)
    return out if np.ndim(x) else float(out[0])


def branch(profile: ProfileDensity, x) -> np.ndarray:
    """Label per point: ``tail`` (x >= 1), ``body`` or ``asymptote``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lab = np.where(x >= 1, "tail", "body").astype(object)
    body = profile.body
    if isinstance(body, NumericTable) and body.y_switch is not None:
        lab[(x < 1) & (-np.log(np.where(x > 0, x, 1.0)) >= body.y_switch)] = "asymptote"
    return lab


def body_mass(profile: ProfileDensity) -> float:
    """``int_0^1 nu``, from the transform at 0 (no quadrature)."""
    val = mtilde_transform(profile.params, profile.kernel, 0.0, beta_plus=profile.beta_plus)
    return val / profile.total_mass


def cdf(profile: ProfileDensity, x):
    """Distribution function of the profile."""
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x_arr)
    bp, mass, ap = profile.beta_plus, profile.total_mass, profile.params.a_plus
    up = x_arr >= 1
    out[up] = 1.0 - x_arr[up] ** -bp / (ap * bp * mass)
    lo = ~up
    if np.any(lo):
        if isinstance(profile.body, ClosedFormMonomial):
            bm, am = profile.beta_minus, profile.params.a_minus
            out[lo] = np.where(x_arr[lo] > 0, x_arr[lo], 0.0) ** bm / (am * bm * mass)
        else:
            out[lo] = [_body_cdf_quad(profile, xi) for xi in x_arr[lo]]
    return out if np.ndim(x) else float(out[0])


def _body_cdf_quad(profile: ProfileDensity, x: float) -> float:
    if x <= 0:
        return 0.0
    y0 = -math.log(x)
    f = lambda y: float(mtilde(profile, y))
    tail = 0.0
    body = profile.body
    y_far = body.y_switch if isinstance(body, NumericTable) and body.y_switch else Y_RELIABLE
    if y0 < y_far:
        val = integrate.quad(f, y0, y_far, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    else:
        val, y_far = 0.0, y0
    if profile.cramer is not None and profile.beta_minus:
        tail = profile.cramer * math.exp(-profile.beta_minus * y_far) / profile.beta_minus
    return (val + tail) / profile.total_mass


def integrate_density(profile: ProfileDensity, x_max: float = 1e3) -> float:
    """``int nu`` by adaptive quadrature on (0, 1) and (1, x_max) plus the analytic tail."""
    f_body = lambda y: float(mtilde(profile, y)) / profile.total_mass   # x = exp(-y)
    body = profile.body
    y_cut = Y_RELIABLE
    if isinstance(body, NumericTable) and body.y_switch is not None:
        y_cut = body.y_switch
    lower = integrate.quad(f_body, 0.0, y_cut, limit=400, epsabs=1e-13, epsrel=1e-11)[0]
    if profile.beta_minus:
        # analytic remainder of the exponential asymptote beyond y_cut
        amp = (profile.cramer if isinstance(body, NumericTable) else 1.0 / profile.params.a_minus)
        lower += amp * math.exp(-profile.beta_minus * y_cut) / profile.beta_minus / profile.total_mass
    upper = integrate.quad(lambda x: float(nu(profile, x)), 1.0, x_max, limit=400,
                           epsabs=1e-13, epsrel=1e-11)[0]
    bp = profile.beta_plus
    upper += profile.c1 / profile.params.a_plus * x_max ** -bp / bp
    return lower + upper
