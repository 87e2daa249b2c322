"""Finite-volume solver for the growth-fragmentation equation.

The equation is solved on the log scale ``y = log x`` for ``v = x u``:

    d/dt v + d/dy (a(y) v) = int_0^1 v(y - log s) rho(s) ds - K v,

with ``a = a_plus`` for ``y >= 0`` and ``a_minus`` below.  In these
variables ``<u, 1> = int v dy`` and the gain term is a correlation with a
fixed kernel, so the scheme is

* first-order upwind transport (all speeds are positive), zero inflow at
  ``x_min`` and free outflow at ``x_max``;
* gain assembled exactly for piecewise-constant ``v``: the mass of cell
  ``i + k`` sent to cell ``i`` is ``w_k = int rho(s) hat((-log s - k h) / h) ds``
  and is applied by FFT;
* explicit Euler (default) or Heun in time under the positivity bound
  ``dt <= safety / (max a / h + K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import CflError, ConfigError, NotConverged
from .kernel import FragmentationKernel, ModelParams, MonomialKernel

DT_SAFETY = 0.9
GL_POINTS = 16
STATIONARY_RTOL = 1e-4


@dataclass(frozen=True)
class Grid:
    """Cells uniform in ``log x`` with an edge exactly at ``x = 1``."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not (0 < self.x_min < 1 < self.x_max):
            raise ConfigError("need 0 < x_min < 1 < x_max")
        if self.n_cells < 2:
            raise ConfigError("need at least two cells")
        j = -math.log(self.x_min) / self.h
        if abs(j - round(j)) > 1e-9 * max(1.0, j):
            raise ConfigError("grid misaligned: no cell edge at x = 1")

    @property
    def h(self) -> float:
        return (math.log(self.x_max) - math.log(self.x_min)) / self.n_cells

    @property
    def i_one(self) -> int:
        """Index of the edge at x = 1 (first cell of the upper region)."""
        return int(round(-math.log(self.x_min) / self.h))

    @property
    def y_edges(self) -> np.ndarray:
        i = np.arange(self.n_cells + 1) - self.i_one
        return i * self.h

    @property
    def edges(self) -> np.ndarray:
        return np.exp(self.y_edges)

    @property
    def y_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) - self.i_one + 0.5) * self.h

    @property
    def centers(self) -> np.ndarray:
        return np.exp(self.y_centers)

    def cell_integrals(self, f) -> np.ndarray:
        """``int_cell f(e^y) dy`` per cell; exact for indicators built by :func:`indicator`."""
        iv = getattr(f, "interval", None)
        ye = self.y_edges
        if iv is not None:
            lo = -math.inf if iv[0] <= 0 else math.log(iv[0])
            hi = math.inf if math.isinf(iv[1]) else math.log(iv[1])
            return np.clip(np.minimum(ye[1:], hi) - np.maximum(ye[:-1], lo), 0.0, None)
        nodes, weights = np.polynomial.legendre.leggauss(8)
        y = ye[:-1, None] + 0.5 * self.h * (nodes[None, :] + 1.0)
        return 0.5 * self.h * (np.asarray(f(np.exp(y)), dtype=float) @ weights)


def indicator(lo: float, hi: float = math.inf):
    """Test function ``1_[lo, hi)`` whose cell integrals are computed exactly."""
    def f(x):
        x = np.asarray(x, dtype=float)
        return ((x >= lo) & (x < hi)).astype(float)
    f.interval = (lo, hi)
    return f


@dataclass
class PdeState:
    """Cell averages of ``v = x u`` on the log grid at time ``t``."""

    grid: Grid
    v: np.ndarray
    t: float = 0.0

    @property
    def u(self) -> np.ndarray:
        """Cell averages of the concentration ``u`` over each size interval."""
        e = self.grid.edges
        return self.v * self.grid.h / np.diff(e)

    def pair(self, f) -> float:
        """``<u_t, f>``."""
        return math.fsum(self.v * self.grid.cell_integrals(f))

    def copy(self) -> "PdeState":
        return PdeState(self.grid, self.v.copy(), self.t)


def delta_at_one(grid: Grid) -> PdeState:
    """Unit mass in the cell just above ``x = 1``."""
    v = np.zeros(grid.n_cells)
    v[grid.i_one] = 1.0 / grid.h
    return PdeState(grid, v, 0.0)


# -- operator ---------------------------------------------------------------------------
def gain_weights(grid: Grid, kernel: FragmentationKernel) -> tuple[np.ndarray, float]:
    """``(w, lost)``: weights ``w_k`` for ``k < n`` and the rate mass beyond the grid."""
    h, n = grid.h, grid.n_cells
    total = float(kernel.moment(0.0))
    if isinstance(kernel, MonomialKernel):
        g = kernel.gamma
        k = np.arange(n)
        w = np.exp(-g * k * h) * 2.0 * (math.cosh(g * h) - 1.0) / (g * g * h)
        w[0] = (g * h - 1.0 + math.exp(-g * h)) / (g * g * h)
        # geometric remainder of the k >= n weights
        lost = (math.exp(-g * n * h) * 2.0 * (math.cosh(g * h) - 1.0) / (g * g * h)
                / -math.expm1(-g * h))
        return w, lost
    nodes, weights = np.polynomial.legendre.leggauss(GL_POINTS)
    # integrand on sigma = -log s: rho(e^-sigma) e^-sigma; split at every half cell
    j = np.arange(n)
    lo = j[:, None] * h
    sig = lo + 0.5 * h * (nodes[None, :] + 1.0)
    dens = np.asarray(kernel.density(np.exp(-sig)), dtype=float) * np.exp(-sig)
    frac = (sig - lo) / h                       # position inside [j h, (j+1) h]
    rise = 0.5 * h * ((dens * frac) @ weights)  # hat of k = j + 1
    fall = 0.5 * h * ((dens * (1.0 - frac)) @ weights)  # hat of k = j
    w = fall.copy()
    w[1:] += rise[:-1]
    lost = max(total - math.fsum(w), 0.0)
    return w, lost


@dataclass
class Operator:
    grid: Grid
    params: ModelParams
    kernel: FragmentationKernel
    speed: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    K: float = 0.0
    r_tilde: float = 0.0
    loss_below: np.ndarray = field(default=None, repr=False)
    transport: bool = True
    fragmentation: bool = True

    def __post_init__(self):
        n = self.grid.n_cells
        self._wr_hat = fft.rfft(self.w[::-1], 2 * n)

    @property
    def dt_max(self) -> float:
        a = float(self.speed.max()) if self.transport else 0.0
        K = self.K if self.fragmentation else 0.0
        return 1.0 / (a / self.grid.h + K)

    def gain(self, v: np.ndarray) -> np.ndarray:
        n = v.size
        g = fft.irfft(fft.rfft(v, 2 * n) * self._wr_hat, 2 * n)[n - 1:2 * n - 1]
        # FFT round-off can produce tiny negative values where the true gain is ~0
        return np.maximum(g, 0.0)

    def flux(self, v: np.ndarray) -> np.ndarray:
        """Face fluxes at all ``n + 1`` faces (zero inflow on the left)."""
        F = np.empty(v.size + 1)
        F[0] = 0.0
        F[1:] = self.speed * v
        return F

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        if self.transport:
            F = self.flux(v)
            out -= (F[1:] - F[:-1]) / self.grid.h
        if self.fragmentation:
            out += self.gain(v) - self.K * v
        return out

    def leakage(self, v: np.ndarray) -> tuple[float, float]:
        """Mass per unit time leaving through ``x_max`` and fragmenting below ``x_min``."""
        out = float(self.speed[-1] * v[-1]) if self.transport else 0.0
        frag = math.fsum(self.loss_below * v) * self.grid.h if self.fragmentation else 0.0
        return out, frag


def build_operator(grid: Grid, params: ModelParams, kernel: FragmentationKernel, *,
                   transport: bool = True, fragmentation: bool = True) -> Operator:
    speed = np.where(grid.y_centers >= 0, params.a_plus, params.a_minus).astype(float)
    w, lost = gain_weights(grid, kernel)
    # rate at which mass of cell j is sent below the grid: sum_{k > j} w_k + lost
    rev = np.cumsum(w[::-1])[::-1]
    loss_below = np.concatenate((rev[1:], [0.0])) + lost
    K, r = kernel.total_rates()
    return Operator(grid, params, kernel, speed, w, K, r, loss_below, transport, fragmentation)


def step(op: Operator, state: PdeState, dt: float, method: str = "euler",
         safety: float = DT_SAFETY) -> PdeState:
    """One explicit step; raises :class:`CflError` above the positivity bound."""
    bound = safety * op.dt_max
    if dt > bound * (1 + 1e-12):
        raise CflError(f"dt={dt:g} exceeds the stability bound {bound:g}")
    v = state.v
    if method == "euler":
        new = v + dt * op.apply(v)
    elif method == "heun":
        v1 = v + dt * op.apply(v)
        new = 0.5 * (v + v1 + dt * op.apply(v1))
    else:
        raise ConfigError(f"unknown time stepping method {method!r}")
    return PdeState(state.grid, new, state.t + dt)


@dataclass
class Observation:
    times: np.ndarray
    values: np.ndarray           # <u_t, f> per time and observable
    scaled: np.ndarray           # exp(-lambda* t) <u_t, f>
    outflow: np.ndarray          # mass per unit time through x_max
    fragment_loss: np.ndarray    # mass per unit time fragmenting below x_min
    mass: np.ndarray             # <u_t, 1>
    lost_descendants: np.ndarray  # expected offspring count of all mass lost so far
    final: PdeState
    previous: PdeState | None = None

    @property
    def corrected_mass(self) -> np.ndarray:
        """``<u_t, 1>`` plus what the lost particles would have grown into.

        Since the constant function is an eigenfunction with eigenvalue
        ``lambda*``, a particle lost at time ``s`` would on average have
        ``exp(lambda* (t - s))`` descendants at ``t``.
        """
        return self.mass + self.lost_descendants

    def csv(self, names) -> str:
        head = ["t"] + [f"{n}" for n in names] + [f"scaled_{n}" for n in names] + [
            "mass", "outflow", "fragment_loss", "lost_descendants"]
        rows = [",".join(head)]
        for i, t in enumerate(self.times):
            vals = [t, *self.values[i], *self.scaled[i], self.mass[i], self.outflow[i],
                    self.fragment_loss[i], self.lost_descendants[i]]
            rows.append(",".join(repr(float(x)) for x in vals))
        return "\n".join(rows) + "\n"


def evolve_and_observe(op: Operator, state: PdeState, t_final: float, observables,
                       obs_times=None, *, method: str = "euler", safety: float = DT_SAFETY,
                       dt: float | None = None, keep_previous: float = 1.0) -> Observation:
    """Integrate to ``t_final`` recording ``<u_t, f>`` at ``obs_times``.

    The state one time unit (``keep_previous``) before the end is kept for
    :func:`profile_extract`.
    """
    if obs_times is None:
        obs_times = np.linspace(state.t, t_final, 51)
    obs_times = np.unique(np.append(np.asarray(obs_times, dtype=float), t_final))
    obs_times = obs_times[(obs_times >= state.t) & (obs_times <= t_final)]
    weights = [state.grid.cell_integrals(f) for f in observables]
    dt = safety * op.dt_max if dt is None else dt
    lam = op.kernel.lambda_star()
    t_prev = t_final - keep_previous
    marks = np.unique(np.append(obs_times, t_prev if t_prev > state.t else state.t))
    vals, outs, frags, masses, losts, prev = [], [], [], [], [], None
    lost = 0.0
    cur = state
    for target in marks:
        while cur.t < target - 1e-12 * max(1.0, target):
            h = min(dt, target - cur.t)
            o, fl = op.leakage(cur.v)
            cur = step(op, cur, h, method, safety)
            lost = lost * math.exp(lam * h) + h * (o + fl)
            if target - cur.t < 1e-12 * max(1.0, target):
                cur.t = float(target)
        if keep_previous and abs(target - t_prev) <= 1e-12 * max(1.0, target):
            prev = cur.copy()
        if np.any(np.isclose(obs_times, target, rtol=0, atol=1e-12 * max(1.0, target))):
            vals.append([math.fsum(cur.v * wf) for wf in weights])
            o, fl = op.leakage(cur.v)
            outs.append(o)
            frags.append(fl)
            masses.append(math.fsum(cur.v) * cur.grid.h)
            losts.append(lost)
    vals = np.array(vals).reshape(len(obs_times), len(weights))
    times = obs_times
    return Observation(times, vals, vals * np.exp(-lam * times)[:, None], np.array(outs),
                       np.array(frags), np.array(masses), np.array(losts), cur, prev)


@dataclass
class DensityTable:
    x: np.ndarray          # cell centres
    edges: np.ndarray
    density: np.ndarray    # normalised density of the profile per cell
    cdf: np.ndarray        # at the right edges
    change_rate: float     # relative L1 change per unit time of the normalised shape


def profile_extract(state: PdeState, previous: PdeState | None = None,
                    rtol: float = STATIONARY_RTOL) -> DensityTable:
    """Normalised profile from a late-time state.

    With ``previous`` given, the relative L1 change per unit time of the
    normalised shape is measured and :class:`NotConverged` raised when it
    is not below ``rtol``.
    """
    grid = state.grid
    mass = math.fsum(state.v) * grid.h
    shape = state.v / mass
    rate = 0.0
    if previous is not None:
        dt = state.t - previous.t
        if dt <= 0:
            raise ValueError("previous state must be earlier")
        old = previous.v / (math.fsum(previous.v) * grid.h)
        rate = math.fsum(np.abs(shape - old)) * grid.h / dt
        if not rate < rtol:
            raise NotConverged(f"profile still changing: {rate:.2e} per unit time")
    e = grid.edges
    dens = shape * grid.h / np.diff(e)
    cdf = np.cumsum(shape) * grid.h
    return DensityTable(grid.centers, e, dens, cdf, rate)
