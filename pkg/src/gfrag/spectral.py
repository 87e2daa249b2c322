"""Laplace exponents of the driving Levy processes and the regime analysis.

Four spectrally negative compound-Poisson-plus-drift processes appear:

* ``Xi`` family, jump measure ``s rho(s) ds`` on the log scale,
  ``psi(q) = a q + M(q + 1) - M(1)``: the log-size process with drift ``a``.
* ``Eta`` family, jump measure ``rho(s) ds``,
  ``psi(q) = a q + M(q) - M(0)``: the tilted log-size process.

Each comes in a ``plus`` (drift ``a_plus``, above level 0) and a ``minus``
(drift ``a_minus``, below level 0) version.  ``L(q)`` is the Laplace
functional of the return time to 0, and the Malthus exponent is the ``q``
where it equals one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RegimeError
from .kernel import FragmentationKernel, ModelParams, _is_mp
from .roots import FTOL, expand_right, safeguarded_root

XI = "Xi"
ETA = "Eta"
_SHIFT = {XI: 1.0, ETA: 0.0}
REL_TOL_CLASSIFY = 1e-12


@dataclass(frozen=True)
class Infimum:
    """Minimiser of a convex exponent; ``attained`` is False for boundary minima."""

    q_min: float
    psi_min: float
    attained: bool


@dataclass(frozen=True, eq=False)
class LaplaceExponent:
    drift: float
    family: str
    kernel: FragmentationKernel

    def __post_init__(self):
        if self.family not in _SHIFT:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.drift > 0:
            raise DomainError("drift must be positive")

    @property
    def shift(self) -> float:
        return _SHIFT[self.family]

    @property
    def lower(self) -> float:
        """Left end of the finiteness domain."""
        return self.kernel.moment_lower - self.shift

    @property
    def lower_inclusive(self) -> bool:
        return self.kernel.lower_inclusive

    def __call__(self, q):
        return self.psi(q)

    def psi(self, q):
        M = self.kernel.moment
        c = self.shift
        if _is_mp(q) or isinstance(q, np.ndarray):
            base = M(q * 0 + c)
        else:
            q = float(q)
            base = M(c)
        return self.drift * q + M(q + c) - base

    def psi_prime(self, q):
        if not (_is_mp(q) or isinstance(q, np.ndarray)):
            q = float(q)
        return self.drift + self.kernel.moment_log(q + self.shift)

    # -- convex analysis -------------------------------------------------------
    def _interior_left(self, q_right: float) -> float:
        """A point strictly inside the domain, left of ``q_right``, as close to the edge as useful."""
        lo = self.lower
        if self.lower_inclusive:
            return lo
        gap = q_right - lo
        return lo + gap * 2.0 ** -30

    def infimum(self) -> Infimum:
        cached = getattr(self, "_inf", None)
        if cached is not None:
            return cached
        dpsi = self.psi_prime
        left = self._interior_left(self.lower + 1.0)
        if dpsi(left) >= 0:
            res = Infimum(left, float(self.psi(left)), False)
        else:
            hi = expand_right(dpsi, left, 0.0, step=1.0)
            q = safeguarded_root(dpsi, left, hi, ftol=1e-15)
            res = Infimum(q, float(self.psi(q)), True)
        object.__setattr__(self, "_inf", res)
        return res

    def right_inverse(self, theta: float, ftol: float = FTOL) -> float:
        """Largest root of ``psi(q) = theta``."""
        theta = float(theta)
        inf = self.infimum()
        tol = ftol * max(1.0, abs(theta))
        if theta < inf.psi_min - tol:
            raise DomainError(f"theta={theta} below the infimum {inf.psi_min}")
        if theta <= inf.psi_min:
            return inf.q_min
        if theta == 0.0 and inf.q_min <= 0.0:
            return 0.0
        g = lambda q: float(self.psi(q)) - theta
        hi = expand_right(g, inf.q_min, 0.0, step=max(1.0, abs(theta) / self.drift))
        return safeguarded_root(g, inf.q_min, hi, df=lambda q: float(self.psi_prime(q)), ftol=tol)

    def left_root(self, theta: float = 0.0, ftol: float = FTOL) -> float | None:
        """Smallest root of ``psi(q) = theta`` inside the domain, or ``None``."""
        inf = self.infimum()
        if not inf.attained or theta < inf.psi_min:
            return None
        g = lambda q: float(self.psi(q)) - theta
        left = self._interior_left(inf.q_min)
        if not self.lower_inclusive:
            # walk towards the singular edge until psi exceeds theta
            gap = inf.q_min - self.lower
            for k in range(1, 60):
                left = self.lower + gap * 2.0 ** -k
                if g(left) > 0:
                    break
        if not g(left) > 0:
            return None
        return safeguarded_root(g, left, inf.q_min, df=lambda q: float(self.psi_prime(q)),
                                ftol=ftol * max(1.0, abs(theta)))


def exponents(params: ModelParams, kernel: FragmentationKernel, family: str = XI):
    """``(plus, minus)`` exponents of the given family."""
    return (LaplaceExponent(params.a_plus, family, kernel),
            LaplaceExponent(params.a_minus, family, kernel))


def psi(exp: LaplaceExponent, q):
    return exp.psi(q)


def psi_prime(exp: LaplaceExponent, q):
    return exp.psi_prime(q)


def right_inverse(exp: LaplaceExponent, theta: float) -> float:
    return exp.right_inverse(theta)


def infimum(exp: LaplaceExponent) -> Infimum:
    return exp.infimum()


# -- L(q) -----------------------------------------------------------------------
def q_star(params: ModelParams, kernel: FragmentationKernel) -> float:
    xp, xm = exponents(params, kernel, XI)
    return max(xm.infimum().psi_min + params.a_minus, xp.infimum().psi_min + params.a_plus)


def _divided_moment(kernel, lo: float, hi: float) -> float:
    """``(M(lo) - M(hi)) / (hi - lo)``, continuous as ``hi -> lo``."""
    d = hi - lo
    if abs(d) < 1e-6 * max(1.0, abs(lo)):
        return -float(kernel.moment_log(0.5 * (lo + hi)))
    return (float(kernel.moment(lo)) - float(kernel.moment(hi))) / d


def L(params: ModelParams, kernel: FragmentationKernel, q: float) -> float:
    """Laplace functional of the first return time of the log-size process to 0.

    Evaluated as ``(M(1 + phi_minus) - M(1 + phi_plus)) / (a_plus (phi_plus - phi_minus))``
    with ``phi_pm`` the right inverses at ``q - a_pm``; this form is
    algebraically equal to the textbook expression and stays finite in the
    linear case ``a_plus == a_minus``.  Returns ``inf`` below ``q_star`` and
    at ``q_star`` unless both minima are attained in the interior.
    """
    xp, xm = exponents(params, kernel, XI)
    qs = q_star(params, kernel)
    if q < qs:
        return math.inf
    if q == qs or math.isclose(q, qs, rel_tol=1e-14, abs_tol=1e-14):
        if not (xp.infimum().attained and xm.infimum().attained):
            return math.inf
        q = qs
    phi_m = xm.right_inverse(q - params.a_minus)
    phi_p = xp.right_inverse(q - params.a_plus)
    return _divided_moment(kernel, 1.0 + phi_m, 1.0 + phi_p) / params.a_plus


# -- regimes -------------------------------------------------------------------
class Regime(str, enum.Enum):
    STRICT = "StrictMalthusian"
    BOUNDARY_LOW = "BoundaryLow"
    BOUNDARY_HIGH = "BoundaryHigh"
    FAILS_LOW = "FailsLow"
    FAILS_HIGH = "FailsHigh"

    @property
    def is_boundary(self) -> bool:
        return self in (Regime.BOUNDARY_LOW, Regime.BOUNDARY_HIGH)


class Recurrence(str, enum.Enum):
    DRIFT_UP = "drifts_to_plus_infinity"
    DRIFT_DOWN = "drifts_to_minus_infinity"
    NULL_UPPER = "null_recurrent_upper_branch_critical"
    NULL_LOWER = "null_recurrent_lower_branch_critical"
    POSITIVE = "positive_recurrent"


@dataclass(frozen=True)
class RegimeReport:
    lambda_star: float
    condition_low: float
    regime: Regime
    beta_plus: float | None
    beta_minus: float | None
    L_prime_at_lambda: float | None
    recurrence_class: Recurrence

    def to_dict(self) -> dict:
        return {
            "lambda_star": self.lambda_star,
            "condition_low": self.condition_low,
            "regime": self.regime.value,
            "beta_plus": self.beta_plus,
            "beta_minus": self.beta_minus,
            "L_prime_at_lambda": self.L_prime_at_lambda,
            "recurrence_class": self.recurrence_class.value,
        }


def _sign(x: float, scale: float) -> int:
    if abs(x) <= REL_TOL_CLASSIFY * scale:
        return 0
    return 1 if x > 0 else -1


def classify_recurrence(params: ModelParams, kernel: FragmentationKernel,
                        family: str = ETA) -> Recurrence:
    """Long-run behaviour of the refracted process from the drifts of its two branches."""
    plus, minus = exponents(params, kernel, family)
    sp = _sign(plus.psi_prime(0.0), params.a_plus)
    sm = _sign(minus.psi_prime(0.0), params.a_minus)
    table = {
        (1, 1): Recurrence.DRIFT_UP,
        (-1, -1): Recurrence.DRIFT_DOWN,
        (0, 1): Recurrence.NULL_UPPER,
        (-1, 0): Recurrence.NULL_LOWER,
        (-1, 1): Recurrence.POSITIVE,
        # linear growth with zero mean drift: both branches critical
        (0, 0): Recurrence.NULL_UPPER,
    }
    try:
        return table[(sp, sm)]
    except KeyError:
        raise DomainError(f"sign pattern {(sp, sm)} impossible for a_plus <= a_minus") from None


def regime_of(params: ModelParams, kernel: FragmentationKernel) -> Regime:
    c = -kernel.log_moment()
    lo_eq = math.isclose(params.a_plus, c, rel_tol=REL_TOL_CLASSIFY)
    hi_eq = math.isclose(params.a_minus, c, rel_tol=REL_TOL_CLASSIFY)
    if lo_eq:
        return Regime.BOUNDARY_LOW
    if hi_eq:
        return Regime.BOUNDARY_HIGH
    if params.a_plus > c:
        return Regime.FAILS_LOW
    if params.a_minus < c:
        return Regime.FAILS_HIGH
    return Regime.STRICT


def beta_plus(params: ModelParams, kernel: FragmentationKernel) -> float | None:
    """Positive root of the upper tilted exponent; tail index of the profile."""
    eta_p = LaplaceExponent(params.a_plus, ETA, kernel)
    if _sign(eta_p.psi_prime(0.0), params.a_plus) >= 0:
        return None
    return eta_p.right_inverse(0.0)


def cramer_root(params: ModelParams, kernel: FragmentationKernel) -> float | None:
    """``beta > 0`` with ``psi_eta_minus(-beta) = 0``, or ``None`` if there is none."""
    eta_m = LaplaceExponent(params.a_minus, ETA, kernel)
    d0 = eta_m.psi_prime(0.0)
    if _sign(d0, params.a_minus) <= 0:
        return None
    q = eta_m.left_root(0.0)
    if q is None or q >= 0:
        return None
    return -q


def L_prime_at_lambda(params: ModelParams, kernel: FragmentationKernel) -> float:
    """Slope of ``L`` at the Malthus exponent in the strict regime."""
    reg = regime_of(params, kernel)
    if reg is not Regime.STRICT:
        raise RegimeError(f"L'(lambda) is only finite in the strict regime (got {reg.value})")
    if params.is_linear:
        raise RegimeError("linear growth: the refraction formula degenerates")
    xp, xm = exponents(params, kernel, XI)
    phi = xp.right_inverse(xp.psi(-1.0))
    return -(params.a_minus - params.a_plus) / params.a_plus / xm.psi_prime(-1.0) / (phi + 1.0)


def malthus(params: ModelParams, kernel: FragmentationKernel) -> RegimeReport:
    lam = kernel.lambda_star()
    c = -kernel.log_moment()
    reg = regime_of(params, kernel)
    bp = beta_plus(params, kernel)
    bm = cramer_root(params, kernel)
    if reg is Regime.STRICT and not params.is_linear:
        lp = L_prime_at_lambda(params, kernel)
    elif reg.is_boundary:
        lp = -math.inf
    else:
        lp = None
    return RegimeReport(lam, c, reg, bp, bm, lp, classify_recurrence(params, kernel, ETA))
