"""Homogeneous fragmentation kernels and their moment functionals.

A kernel is a rate density ``rho`` on (0, 1) for the ratio daughter/mother.
Everything downstream only needs the Mellin-type moments

    M(q) = int_0^1 s**q rho(s) ds

and their q-derivative ``int s**q log(s) rho(s) ds``, plus inverse-CDF
sampling of the two normalised jump laws ``s rho(s) / K`` (jumps of the
size process X) and ``rho(s) / r`` (jumps of the tilted process Y).

Moments accept floats, numpy arrays (real or complex) and mpmath scalars,
so the same kernel feeds root finders, contour integrals and the
high-precision Stehfest cross-check.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

X_TYPE = "X"
Y_TYPE = "Y"
_KIND_POWER = {X_TYPE: 1, Y_TYPE: 0}


def _is_mp(q) -> bool:
    return isinstance(q, (mpmath.mpf, mpmath.mpc))


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the growth rate c(x) = a_minus x (x < 1), a_plus x (x >= 1).

    ``a_plus == a_minus`` (linear growth) is accepted so that the linear-case
    reductions can be evaluated; ``a_plus > a_minus`` is rejected.
    """

    a_minus: float
    a_plus: float

    def __post_init__(self):
        if not (self.a_minus > 0 and self.a_plus > 0):
            raise DomainError("growth coefficients must be positive")
        if self.a_plus > self.a_minus:
            raise DomainError("require a_plus <= a_minus")

    @property
    def is_linear(self) -> bool:
        return self.a_plus == self.a_minus

    def rate(self, level):
        """Drift on the log scale: a_plus on [0, inf), a_minus below."""
        return np.where(np.asarray(level) >= 0, self.a_plus, self.a_minus)


class FragmentationKernel:
    """Common interface; see :class:`MonomialKernel` and :class:`TabulatedKernel`."""

    epsilon: float

    # lower end of the finiteness domain of moment(); inclusive flag
    moment_lower: float
    lower_inclusive: bool

    def moment(self, q):
        raise NotImplementedError

    def moment_log(self, q):
        """``int_0^1 s**q log(s) rho(s) ds`` (the q-derivative of the moment)."""
        raise NotImplementedError

    def density(self, s):
        raise NotImplementedError

    # -- derived functionals -------------------------------------------------
    def in_domain(self, q) -> bool:
        q = float(q)
        return q >= self.moment_lower if self.lower_inclusive else q > self.moment_lower

    def check_domain(self, q):
        """Reject real ``q`` outside the finiteness domain.

        Complex arguments are treated as evaluations of the analytic
        continuation (needed on inversion contours) and are not checked.
        """
        if isinstance(q, mpmath.mpc) or np.iscomplexobj(q):
            return
        qa = float(q) if _is_mp(q) else np.asarray(q, dtype=float)
        lo = self.moment_lower
        bad = np.any(qa < lo) if self.lower_inclusive else np.any(qa <= lo)
        if bad:
            raise DomainError(f"moment diverges for q={q!r} (domain starts at {lo:g})")

    def log_moment(self) -> float:
        return float(self.moment_log(0.0))

    def total_rates(self) -> tuple[float, float]:
        """``(K, r_tilde)``: dislocation rate of X and total jump rate of Y."""
        return float(self.moment(1.0)), float(self.moment(0.0))

    def lambda_star(self) -> float:
        K, r = self.total_rates()
        return r - K

    def quad_moment(self, q: float, log_power: int = 0, rtol: float = 1e-10) -> float:
        """Independent adaptive-quadrature evaluation of ``int s**q log(s)**k rho``."""
        f = lambda s: s ** q * math.log(s) ** log_power * float(self.density(s))
        pts = getattr(self, "s", None)
        val, err = integrate.quad(f, 0.0, 1.0, epsrel=rtol, epsabs=0.0, limit=500,
                                  points=None if pts is None else list(pts[:100]))
        if err > max(rtol * abs(val), 1e-300) * 10:
            raise QuadratureError(f"quadrature error estimate {err:.2e} for q={q}")
        return val

    # -- jumps -----------------------------------------------------------------
    def sample_jump(self, kind: str, u):
        """Log-jump ``z = log S`` for uniform(s) ``u`` in (0, 1)."""
        raise NotImplementedError

    def jump_table(self):
        """Arrays consumed by the compiled samplers (see ``pdmp``)."""
        raise NotImplementedError

    def jump_cdf(self, kind: str, s):
        raise NotImplementedError


@dataclass(frozen=True)
class MonomialKernel(FragmentationKernel):
    """``rho(s) = s**(gamma - 1)`` with ``gamma >= 1``."""

    gamma: float = 1.0
    epsilon: float = 0.5

    def __post_init__(self):
        if not self.gamma >= 1:
            raise DomainError("monomial kernel needs gamma >= 1")
        if not 0 < self.epsilon < self.gamma:
            raise DomainError("epsilon must lie in (0, gamma)")

    @property
    def moment_lower(self):
        return -self.gamma

    lower_inclusive = False

    def moment(self, q):
        self.check_domain(q)
        return 1.0 / (q + self.gamma)

    def moment_log(self, q):
        self.check_domain(q)
        return -1.0 / (q + self.gamma) ** 2

    def log_moment(self) -> float:
        return -1.0 / self.gamma ** 2

    def density(self, s):
        return np.asarray(s, dtype=float) ** (self.gamma - 1.0)

    def sample_jump(self, kind, u):
        p = _KIND_POWER[kind]
        return np.log(u) / (self.gamma + p)

    def jump_cdf(self, kind, s):
        return np.asarray(s, dtype=float) ** (self.gamma + _KIND_POWER[kind])

    def jump_table(self):
        empty = np.zeros(0)
        return 0, float(self.gamma), empty, empty, empty, empty, empty, empty, 1.0, 1.0


@dataclass(frozen=True, eq=False)
class TabulatedKernel(FragmentationKernel):
    """Piecewise-linear density through ``(s_i, rho_i)``, flat beyond the end nodes.

    ``epsilon`` must be given explicitly and is the integrability exponent:
    moments are only evaluated for ``q >= -epsilon``.
    """

    s: np.ndarray = field(default=None)
    rho: np.ndarray = field(default=None)
    epsilon: float = None

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if s.ndim != 1 or s.shape != rho.shape or s.size < 1:
            raise DomainError("s and rho must be 1-d arrays of equal length")
        if np.any(s <= 0) or np.any(s >= 1) or np.any(np.diff(s) <= 0):
            raise DomainError("nodes must be strictly increasing inside (0, 1)")
        if np.any(rho < 0) or not np.any(rho > 0):
            raise DomainError("rho must be nonnegative and not identically zero")
        if self.epsilon is None:
            raise DomainError("tabulated kernels need an explicit epsilon")
        # flat extension to 0 makes M(q) blow up at q = -1 when rho_1 > 0
        if not 0 < self.epsilon < 1:
            raise DomainError("epsilon must lie in (0, 1) for tabulated kernels")
        s.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "rho", rho)
        # slope jumps at every node (flat outside the table)
        slopes = np.concatenate(([0.0], np.diff(rho) / np.diff(s), [0.0]))
        kinks = np.diff(slopes)
        nz = kinks != 0
        object.__setattr__(self, "_kinks", kinks[nz])
        object.__setattr__(self, "_logs", np.log(s)[nz])
        object.__setattr__(self, "_mp_terms", tuple((float(a), float(b))
                                                    for a, b in zip(kinks[nz], np.log(s)[nz])))
        object.__setattr__(self, "_cache", {})
        object.__setattr__(self, "_lock", threading.Lock())
        object.__setattr__(self, "_tables", {})

    moment_lower = property(lambda self: -self.epsilon)
    lower_inclusive = True

    # Integrating by parts twice,
    #   M(q) = (rho_n + G(q)) / (q + 1),  G(q) = sum_p d_p (p**(q+2) - 1) / (q + 2)
    # with d_p the slope jump at node p.  This is also the analytic
    # continuation used on the Talbot contour.
    def _G(self, z):
        L, d = self._logs, self._kinks
        if _is_mp(z):
            T = self._mp_terms
            if z == 0:
                return mpmath.fsum(dp * Lp for dp, Lp in T)
            return mpmath.fsum(dp * mpmath.expm1(z * Lp) for dp, Lp in T) / z
        z = np.asarray(z)
        zl = z[..., None] * L
        small = np.abs(zl) < 1e-4
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            g = np.where(small, L * (1 + zl / 2 + zl * zl / 6),
                         np.expm1(zl) / np.where(small, 1.0, z[..., None]))
            # far left on a contour p**z overflows; callers see nan there
            return g @ d

    def _dG(self, z):
        L, d = self._logs, self._kinks
        if _is_mp(z):
            T = self._mp_terms
            if z == 0:
                return mpmath.fsum(dp * Lp ** 2 / 2 for dp, Lp in T)
            return mpmath.fsum(dp * (mpmath.exp(z * Lp) * (z * Lp - 1) + 1)
                               for dp, Lp in T) / z ** 2
        z = np.asarray(z)
        zl = z[..., None] * L
        small = np.abs(zl) < 1e-3
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            zz = np.where(small, 1.0, z[..., None])
            g = np.where(small, L * L * (0.5 + zl / 3 + zl * zl / 8 + zl ** 3 / 30),
                         (np.exp(zl) * (zl - 1) + 1) / (zz * zz))
            return g @ d

    def moment(self, q):
        self.check_domain(q)
        if isinstance(q, float):
            with self._lock:
                hit = self._cache.get(q)
            if hit is not None:
                return hit
        val = (float(self.rho[-1]) + self._G(q + 2)) / (q + 1)
        if isinstance(val, np.ndarray) and val.ndim == 0:
            val = val[()]
        if isinstance(q, float):
            val = float(val)
            with self._lock:
                self._cache[q] = val
        return val

    def moment_log(self, q):
        self.check_domain(q)
        num = float(self.rho[-1]) + self._G(q + 2)
        val = self._dG(q + 2) / (q + 1) - num / (q + 1) ** 2
        if isinstance(val, np.ndarray) and val.ndim == 0:
            val = val[()]
        return float(val) if isinstance(q, float) else val

    def density(self, s):
        return np.interp(s, self.s, self.rho)

    # -- sampling --------------------------------------------------------------
    def jump_table(self):
        """Segment table on [0, 1] where ``rho = alpha + beta s`` on ``[a_j, b_j]``.

        Returns ``(1, 0.0, a, b, alpha, beta, cdf_x, cdf_y, total_x, total_y)``
        with ``cdf_*`` the normalised jump CDF at each segment start.
        """
        cached = self._tables.get("jump")
        if cached is not None:
            return cached
        s, rho = self.s, self.rho
        a = np.concatenate(([0.0], s))
        b = np.concatenate((s, [1.0]))
        beta = np.concatenate(([0.0], np.diff(rho) / np.diff(s), [0.0]))
        alpha = np.concatenate(([rho[0]], rho[:-1] - beta[1:-1] * s[:-1], [rho[-1]]))
        cdfs, totals = [], []
        for p in (1, 0):
            seg = (alpha * (b ** (p + 1) - a ** (p + 1)) / (p + 1)
                   + beta * (b ** (p + 2) - a ** (p + 2)) / (p + 2))
            tot = math.fsum(seg)
            cdfs.append(np.concatenate(([0.0], np.cumsum(seg)[:-1])) / tot)
            totals.append(tot)
        table = (1, 0.0, a, b, alpha, beta, cdfs[0], cdfs[1], totals[0], totals[1])
        self._tables["jump"] = table
        return table

    def jump_cdf(self, kind, s):
        p = _KIND_POWER[kind]
        _, _, a, b, alpha, beta, cx, cy, tx, ty = self.jump_table()
        cdf0, total = (cx, tx) if p == 1 else (cy, ty)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        j = np.clip(np.searchsorted(a, s, side="right") - 1, 0, len(a) - 1)
        part = (alpha[j] * (s ** (p + 1) - a[j] ** (p + 1)) / (p + 1)
                + beta[j] * (s ** (p + 2) - a[j] ** (p + 2)) / (p + 2))
        return cdf0[j] + part / total

    def sample_jump(self, kind, u):
        from .pdmp import sample_log_jump

        table = self.jump_table()
        p = _KIND_POWER[kind]
        u = np.asarray(u, dtype=float)
        out = np.array([sample_log_jump(float(ui), p, *table) for ui in u.ravel()])
        return out.reshape(u.shape) if u.ndim else float(out[0])


def kernel_from_config(spec: dict, epsilon=None) -> FragmentationKernel:
    """Build a kernel from the ``"kernel"`` block of a run configuration."""
    kind = spec.get("type")
    if kind == "monomial":
        kw = {"gamma": float(spec["gamma"])}
        if epsilon is not None:
            kw["epsilon"] = float(epsilon)
        return MonomialKernel(**kw)
    if kind == "table":
        return TabulatedKernel(s=spec["s"], rho=spec["rho"],
                               epsilon=None if epsilon is None else float(epsilon))
    raise DomainError(f"unknown kernel type {kind!r}")
