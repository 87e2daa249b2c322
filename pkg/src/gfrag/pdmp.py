"""Exact event-driven simulation of the refracted log-size processes.

Between jumps the level moves linearly with slope ``a_plus`` on ``[0, inf)``
and ``a_minus`` below 0; jumps arrive at a constant rate and are all
negative.  Because the jump clock is memoryless and the drift only changes
at level 0, a path is simulated exactly by drawing the next jump time,
flowing deterministically (splitting the segment where it creeps up
through 0) and applying the jump.  No time discretisation is involved.

Two processes are simulated:

* ``Xi`` (log of the size process X): rate ``K = M(1)``, jump law ``s rho(s) / K``;
* ``Eta`` (log of the tilted process Y): rate ``M(0)``, jump law ``rho(s) / M(0)``.

All estimators are deterministic functions of ``(seed, configuration)``:
path ``i`` draws its numbers from its own counter-based stream, and the
final reductions use exactly rounded sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from numba import njit, prange

from .errors import ConfigError, RegimeError
from .kernel import FragmentationKernel, ModelParams
from .rng import key_of, path_key, seed_to_uint, uniform
from .spectral import ETA, XI, Recurrence, Regime, classify_recurrence, q_star, regime_of

MODE_FIXED = 0
MODE_EXCURSION = 1
MODE_EXIT = 2
_MODES = {"fixed": MODE_FIXED, "excursion": MODE_EXCURSION, "exit": MODE_EXIT}

STATUS_HORIZON = 0      # fixed horizon reached
STATUS_COMPLETED = 1    # excursion returned to 0 / exit through the upper level
STATUS_CENSORED = 2     # excursion still running at t_max / exit by a jump below 0

# stream identifiers keep the estimators' random numbers disjoint
STREAM_PATH = 0
STREAM_FK = 1
STREAM_TILTED = 2
STREAM_L = 3
STREAM_OCC = 4
STREAM_MART = 5
STREAM_EXIT = 6


# -- jump sampling ----------------------------------------------------------------
@njit(cache=True)
def sample_log_jump(u, p, kind, gamma, a, b, alpha, beta, cdf_x, cdf_y, tot_x, tot_y):
    """Inverse-CDF draw of ``log S`` for density proportional to ``s**p rho(s)``.

    ``kind == 0`` is the monomial kernel; otherwise the piecewise-linear
    table produced by ``TabulatedKernel.jump_table`` is used.
    """
    if kind == 0:
        return math.log(u) / (gamma + p)
    cdf = cdf_x if p == 1 else cdf_y
    total = tot_x if p == 1 else tot_y
    lo = 0
    hi = cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if cdf[mid] <= u:
            lo = mid
        else:
            hi = mid - 1
    j = lo
    target = (u - cdf[j]) * total
    aj = a[j]
    bj = b[j]
    al = alpha[j]
    be = beta[j]
    p1 = p + 1.0
    p2 = p + 2.0
    base = al * aj ** p1 / p1 + be * aj ** p2 / p2
    s_lo = aj
    s_hi = bj
    s = 0.5 * (aj + bj)
    for _ in range(200):
        F = al * s ** p1 / p1 + be * s ** p2 / p2 - base - target
        if F > 0.0:
            s_hi = s
        else:
            s_lo = s
        d = s ** p * (al + be * s)
        s_new = s - F / d if d > 0.0 else -1.0
        if not (s_lo < s_new < s_hi):
            s_new = 0.5 * (s_lo + s_hi)
        if abs(s_new - s) <= 1e-15 * s_new or s_hi - s_lo <= 1e-16 * s_hi:
            s = s_new
            break
        s = s_new
    return math.log(s)


# -- path engine -------------------------------------------------------------------
@njit(cache=True, inline="always")
def _hist_add(hist, edges, l0, l1, d):
    """Add the time spent by a linear segment from ``l0`` to ``l1`` at speed ``d``."""
    nb = edges.shape[0] - 1
    if nb < 1 or l1 <= l0:
        return
    if l0 < edges[0]:
        hist[0] += (min(l1, edges[0]) - l0) / d
    if l1 > edges[nb]:
        hist[nb + 1] += (l1 - max(l0, edges[nb])) / d
    lo = max(l0, edges[0])
    hi = min(l1, edges[nb])
    if hi <= lo:
        return
    j = np.searchsorted(edges, lo, side="right") - 1
    while j < nb and edges[j] < hi:
        ov = min(hi, edges[j + 1]) - max(lo, edges[j])
        if ov > 0.0:
            hist[j + 1] += ov / d
        j += 1


@njit(cache=True)
def _run_path(key, mode, x0, horizon, upper, rate, a_plus, a_minus, p,
              kind, gamma, ta, tb, talpha, tbeta, cdf_x, cdf_y, tot_x, tot_y,
              rec, edges, hist):
    level = x0
    t = 0.0
    t_above = 0.0
    t_below = 0.0
    n_jumps = 0
    n_rec = 0
    cap = rec.shape[0]
    ctr = np.uint64(0)
    status = STATUS_HORIZON
    went_below = level < 0.0
    while True:
        u = uniform(key, ctr)
        ctr += np.uint64(1)
        remaining = -math.log(u) / rate
        lim = horizon - t
        stop = False
        if level < 0.0:
            tc = -level / a_minus
            if tc <= remaining and tc <= lim:
                _hist_add(hist, edges, level, 0.0, a_minus)
                t_below += tc
                t += tc
                remaining -= tc
                lim -= tc
                level = 0.0
                if n_rec < cap:
                    rec[n_rec, 0] = t
                    rec[n_rec, 1] = 0.0
                    rec[n_rec, 2] = 0.0
                n_rec += 1
                if mode == MODE_EXCURSION and went_below:
                    status = STATUS_COMPLETED
                    break
            else:
                step = min(remaining, lim)
                new = level + a_minus * step
                _hist_add(hist, edges, level, new, a_minus)
                level = new
                t_below += step
                t += step
                remaining -= step
                lim -= step
                if lim <= remaining:
                    stop = True
        if not stop and level >= 0.0:
            step = min(remaining, lim)
            if mode == MODE_EXIT:
                tu = (upper - level) / a_plus
                if tu <= step:
                    _hist_add(hist, edges, level, upper, a_plus)
                    t_above += tu
                    t += tu
                    level = upper
                    status = STATUS_COMPLETED
                    break
            new = level + a_plus * step
            _hist_add(hist, edges, level, new, a_plus)
            level = new
            t_above += step
            t += step
            if lim <= remaining:
                stop = True
        if stop:
            t = horizon
            if mode != MODE_FIXED:
                status = STATUS_CENSORED
            break
        z = sample_log_jump(uniform(key, ctr), p, kind, gamma, ta, tb, talpha, tbeta,
                            cdf_x, cdf_y, tot_x, tot_y)
        ctr += np.uint64(1)
        before = level
        level += z
        n_jumps += 1
        if n_rec < cap:
            rec[n_rec, 0] = t
            rec[n_rec, 1] = before
            rec[n_rec, 2] = level
        n_rec += 1
        if level < 0.0:
            went_below = True
            if mode == MODE_EXIT:
                status = STATUS_CENSORED
                break
    return level, t, t_above, t_below, n_jumps, status, n_rec


@njit(cache=True, parallel=True)
def _run_many(seed, stream, n, mode, x0, horizon, upper, rate, a_plus, a_minus, p,
              kind, gamma, ta, tb, talpha, tbeta, cdf_x, cdf_y, tot_x, tot_y):
    final = np.empty(n)
    elapsed = np.empty(n)
    above = np.empty(n)
    below = np.empty(n)
    jumps = np.empty(n, dtype=np.int64)
    status = np.empty(n, dtype=np.int64)
    rec = np.empty((0, 3))
    edges = np.empty(0)
    for i in prange(n):
        hist = np.empty(0)
        key = path_key(seed, stream, np.uint64(i))
        r = _run_path(key, mode, x0, horizon, upper, rate, a_plus, a_minus, p,
                      kind, gamma, ta, tb, talpha, tbeta, cdf_x, cdf_y, tot_x, tot_y,
                      rec, edges, hist)
        final[i] = r[0]
        elapsed[i] = r[1]
        above[i] = r[2]
        below[i] = r[3]
        jumps[i] = r[4]
        status[i] = r[5]
    return final, elapsed, above, below, jumps, status


# -- configuration and records -------------------------------------------------------
@dataclass(frozen=True)
class SimConfig:
    """What to simulate.

    ``mode`` is ``"fixed"`` (run to ``horizon``), ``"excursion"`` (run until
    the first creeping return to 0 after going below, censored at
    ``horizon``) or ``"exit"`` (single drift ``a_plus``; stop on reaching
    ``upper`` or on jumping below 0).
    """

    process: str = XI
    start_level: float = 0.0
    seed: int = 0
    n_paths: int = 1
    horizon: float = 1.0
    mode: str = "fixed"
    upper: float = math.inf
    rate_scale: float = 1.0
    stream: int = STREAM_PATH

    def __post_init__(self):
        if self.process not in (XI, ETA):
            raise ConfigError(f"unknown process {self.process!r}")
        if self.mode not in _MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be at least 1")
        if not self.horizon > 0:
            raise ConfigError("horizon must be positive")
        if not self.rate_scale > 0:
            raise ConfigError("rate_scale must be positive")
        if self.mode == "exit" and not self.start_level <= self.upper < math.inf:
            raise ConfigError("exit mode needs a finite upper level above the start")


@dataclass
class PathRecord:
    events: list = field(repr=False)     # (time, level before, level after)
    final_level: float
    elapsed: float
    log_weight: float
    time_above: float
    time_below: float
    n_jumps: int
    status: int


@dataclass
class PathBatch:
    final_level: np.ndarray
    elapsed: np.ndarray
    time_above: np.ndarray
    time_below: np.ndarray
    n_jumps: np.ndarray
    status: np.ndarray
    a_plus: float
    a_minus: float

    @property
    def log_weight(self) -> np.ndarray:
        """``log E_t``: integral of the growth rate over size along the path."""
        return self.a_plus * self.time_above + self.a_minus * self.time_below


@dataclass(frozen=True)
class Estimate:
    estimator: str
    value: float
    stderr: float
    n: int
    seed: int
    censored_fraction: float | None = None
    bias_bound: float | None = None

    def record(self) -> dict:
        out = {"estimator": self.estimator, "value": self.value, "stderr": self.stderr,
               "n": self.n, "seed": self.seed}
        if self.censored_fraction is not None:
            out["censored_fraction"] = self.censored_fraction
        if self.bias_bound is not None:
            out["bias_bound"] = self.bias_bound
        return out

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.value - target) <= k * self.stderr


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error with exactly rounded sums (order independent)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    m = math.fsum(v) / n
    if n < 2:
        return m, math.nan
    var = math.fsum((v - m) ** 2) / (n - 1)
    return m, math.sqrt(var / n)


def _jump_args(kernel: FragmentationKernel, process: str, rate_scale: float = 1.0):
    K, r = kernel.total_rates()
    rate, p = (K, 1) if process == XI else (r, 0)
    kind, gamma, a, b, alpha, beta, cx, cy, tx, ty = kernel.jump_table()
    return (rate * rate_scale, p, kind, float(gamma), np.ascontiguousarray(a),
            np.ascontiguousarray(b), np.ascontiguousarray(alpha),
            np.ascontiguousarray(beta), np.ascontiguousarray(cx),
            np.ascontiguousarray(cy), float(tx), float(ty))


def simulate_paths(params: ModelParams, kernel: FragmentationKernel, config: SimConfig) -> PathBatch:
    """Simulate ``config.n_paths`` independent paths (in parallel)."""
    rate, p, *jt = _jump_args(kernel, config.process, config.rate_scale)
    a_plus, a_minus = params.a_plus, params.a_minus
    out = _run_many(seed_to_uint(config.seed), np.uint64(config.stream), config.n_paths,
                    _MODES[config.mode], float(config.start_level), float(config.horizon),
                    float(config.upper), rate, a_plus, a_minus, p, *jt)
    return PathBatch(*out, a_plus=a_plus, a_minus=a_minus)


def simulate_path(params: ModelParams, kernel: FragmentationKernel, config: SimConfig,
                  index: int = 0, edges=None) -> PathRecord:
    """One trajectory with its full event list (path ``index`` of the configured stream)."""
    rate, p, *jt = _jump_args(kernel, config.process, config.rate_scale)
    key = key_of(config.seed, config.stream, index)
    cap = 1024
    edges = np.empty(0) if edges is None else np.asarray(edges, dtype=float)
    while True:
        rec = np.empty((cap, 3))
        hist = np.zeros(edges.size + 1 if edges.size else 0)
        res = _run_path(key, _MODES[config.mode], float(config.start_level), float(config.horizon),
                        float(config.upper), rate, params.a_plus, params.a_minus, p, *jt,
                        rec, edges, hist)
        if res[6] <= cap:
            break
        cap = int(res[6]) + 1
    level, t, above, below, nj, status, n_rec = res
    events = [tuple(map(float, row)) for row in rec[:n_rec]]
    return PathRecord(events, level, t, params.a_plus * above + params.a_minus * below,
                      above, below, int(nj), int(status))


def set_threads(n: int | None):
    if n:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


# -- estimators ----------------------------------------------------------------------
def feynman_kac(params: ModelParams, kernel: FragmentationKernel, f, t: float, x: float,
                n_paths: int, seed: int = 0) -> Estimate:
    """Monte Carlo value of ``T_t f(x) = x E_x[E_t f(X_t) / X_t]``.

    ``f`` must accept a numpy array of sizes.
    """
    if t == 0:
        return Estimate("feynman_kac", float(f(np.array([x]))[0]), 0.0, n_paths, seed)
    cfg = SimConfig(XI, math.log(x), seed, n_paths, t, stream=STREAM_FK)
    b = simulate_paths(params, kernel, cfg)
    X = np.exp(b.final_level)
    vals = x * np.exp(b.log_weight) * np.asarray(f(X), dtype=float) / X
    m, se = mean_stderr(vals)
    return Estimate("feynman_kac", m, se, n_paths, seed)


def martingale_weights(params: ModelParams, kernel: FragmentationKernel, batch: PathBatch,
                       x: float) -> np.ndarray:
    """``M'_t = (x / X_t) E_t exp(-lambda* t)`` for each path of an Xi batch."""
    lam = kernel.lambda_star()
    return np.exp(math.log(x) - batch.final_level + batch.log_weight - lam * batch.elapsed)


def martingale_mean(params: ModelParams, kernel: FragmentationKernel, t: float,
                    n_paths: int, seed: int = 0, x: float = 1.0) -> Estimate:
    cfg = SimConfig(XI, math.log(x), seed, n_paths, t, stream=STREAM_MART)
    b = simulate_paths(params, kernel, cfg)
    m, se = mean_stderr(martingale_weights(params, kernel, b, x))
    return Estimate("martingale_mean", m, se, n_paths, seed)


def tilted_vs_weighted(params: ModelParams, kernel: FragmentationKernel, f, t: float, x: float,
                       n_paths: int, seed: int = 0) -> tuple[Estimate, Estimate]:
    """Two estimators of ``exp(-lambda* t) T_t f(x)``.

    The first simulates the tilted process directly, the second simulates
    the size process and reweights by the martingale ``M'_t``.
    """
    reg = regime_of(params, kernel)
    if reg not in (Regime.STRICT, Regime.BOUNDARY_LOW, Regime.BOUNDARY_HIGH):
        raise RegimeError("the tilted process is only recurrent in the strict or boundary regimes")
    if t == 0:
        v = float(f(np.array([x]))[0])
        return (Estimate("tilted_Y", v, 0.0, n_paths, seed),
                Estimate("weighted_Mprime", v, 0.0, n_paths, seed))
    y_cfg = SimConfig(ETA, math.log(x), seed, n_paths, t, stream=STREAM_TILTED)
    yb = simulate_paths(params, kernel, y_cfg)
    m1, s1 = mean_stderr(np.asarray(f(np.exp(yb.final_level)), dtype=float))
    x_cfg = SimConfig(XI, math.log(x), seed, n_paths, t, stream=STREAM_FK)
    xb = simulate_paths(params, kernel, x_cfg)
    w = martingale_weights(params, kernel, xb, x)
    m2, s2 = mean_stderr(w * np.asarray(f(np.exp(xb.final_level)), dtype=float))
    return (Estimate("tilted_Y", m1, s1, n_paths, seed),
            Estimate("weighted_Mprime", m2, s2, n_paths, seed))


def estimate_L(params: ModelParams, kernel: FragmentationKernel, q: float, n_paths: int,
               t_max: float | None = None, seed: int = 0, method: str = "tilted") -> Estimate:
    """Monte Carlo value of ``L(q) = E_0[exp(-q H) E_H, H < inf]``.

    ``H`` is the first return of the log-size to 0.  ``method="direct"``
    averages ``exp(-q H) E_H`` over excursions of the size process; its
    variance is infinite near the Malthus exponent.  ``method="tilted"``
    (default) simulates excursions of the tilted process and averages
    ``exp(-(q - lambda*) H)``, the same quantity after the change of measure
    by ``M'``; it needs the strict or boundary regime.  Censored excursions
    (``H > t_max``) contribute 0 and are reported.
    """
    qs = q_star(params, kernel)
    if not q > qs:
        raise ConfigError(f"q={q} <= q*={qs}: estimator variance is infinite")
    lam = kernel.lambda_star()
    if t_max is None:
        t_max = 200.0 / lam
    if method == "tilted":
        if regime_of(params, kernel) in (Regime.FAILS_LOW, Regime.FAILS_HIGH):
            raise ConfigError("tilted estimator needs the strict or boundary regime")
        if classify_recurrence(params, kernel, ETA) is Recurrence.DRIFT_UP:
            raise ConfigError("tilted process drifts away from 0")
        cfg = SimConfig(ETA, 0.0, seed, n_paths, t_max, mode="excursion", stream=STREAM_L)
        b = simulate_paths(params, kernel, cfg)
        done = b.status == STATUS_COMPLETED
        vals = np.where(done, np.exp(-(q - lam) * b.elapsed), 0.0)
        name = "L_tilted"
    elif method == "direct":
        cfg = SimConfig(XI, 0.0, seed, n_paths, t_max, mode="excursion", stream=STREAM_L)
        b = simulate_paths(params, kernel, cfg)
        done = b.status == STATUS_COMPLETED
        vals = np.where(done, np.exp(-q * b.elapsed + b.log_weight), 0.0)
        name = "L_direct"
    else:
        raise ConfigError(f"unknown method {method!r}")
    m, se = mean_stderr(vals)
    cens = float(np.count_nonzero(~done)) / n_paths
    # a censored excursion could at most have carried weight exp((a_minus - q) t_max)
    bound = cens * math.exp(min((params.a_minus - q) * t_max, 700.0)) if cens else 0.0
    return Estimate(name, m, se, n_paths, seed, censored_fraction=cens, bias_bound=bound)


@dataclass
class Occupation:
    edges: np.ndarray          # bin edges on the size scale
    time: np.ndarray           # time per bin, plus under/overflow at both ends
    t_total: float
    time_below: float          # time with size < 1
    time_above: float

    @property
    def mass(self) -> np.ndarray:
        return self.time[1:-1] / self.t_total

    @property
    def density(self) -> np.ndarray:
        return self.mass / np.diff(self.edges)

    @property
    def mass_below_one(self) -> float:
        return self.time_below / self.t_total

    @property
    def mass_above_one(self) -> float:
        return self.time_above / self.t_total


def occupation_histogram(params: ModelParams, kernel: FragmentationKernel, t_total: float,
                         bins, seed: int = 0, x0: float = 1.0) -> Occupation:
    """Time-weighted histogram of the tilted size process over one long path.

    ``bins`` are size-scale edges (increasing, positive).  Sojourn times in
    each bin are accumulated analytically along every linear segment.
    """
    rec = classify_recurrence(params, kernel, ETA)
    if rec in (Recurrence.DRIFT_UP, Recurrence.DRIFT_DOWN):
        raise RegimeError(f"tilted process is transient ({rec.value})")
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(edges <= 0) or np.any(np.diff(edges) <= 0):
        raise ConfigError("bins must be increasing positive edges")
    log_edges = np.log(edges)
    rate, p, *jt = _jump_args(kernel, ETA)
    key = key_of(seed, STREAM_OCC, 0)
    hist = np.zeros(edges.size + 1)
    res = _run_path(key, MODE_FIXED, math.log(x0), float(t_total), math.inf, rate,
                    params.a_plus, params.a_minus, p, *jt, np.empty((0, 3)), log_edges, hist)
    return Occupation(edges, hist, float(t_total), float(res[3]), float(res[2]))


def exit_probability(params: ModelParams, kernel: FragmentationKernel, upper: float,
                     n_paths: int, seed: int = 0, branch: str = "minus") -> Estimate:
    """Empirical probability that the tilted single-drift process started at 0
    reaches ``upper`` before jumping below 0."""
    drift = params.a_minus if branch == "minus" else params.a_plus
    single = ModelParams(drift, drift)
    cfg = SimConfig(ETA, 0.0, seed, n_paths, 1e300, mode="exit", upper=upper, stream=STREAM_EXIT)
    b = simulate_paths(single, kernel, cfg)
    m, se = mean_stderr((b.status == STATUS_COMPLETED).astype(float))
    return Estimate("exit_probability", m, se, n_paths, seed)


def events_csv(record: PathRecord) -> str:
    lines = ["time,level_before,level_after"]
    lines += [f"{t!r},{a!r},{b!r}" for t, a, b in record.events]
    return "\n".join(lines) + "\n"


def with_seed(config: SimConfig, seed: int) -> SimConfig:
    return replace(config, seed=seed)
