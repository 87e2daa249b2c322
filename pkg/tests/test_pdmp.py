from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gfrag.errors import ConfigError, RegimeError
from gfrag.kernel import ModelParams, MonomialKernel
from gfrag.pdmp import (SimConfig, estimate_L, events_csv, exit_probability, feynman_kac,
                        martingale_mean, occupation_histogram, simulate_path, simulate_paths,
                        tilted_vs_weighted)
from gfrag.profile import two_sided_exit
from gfrag.spectral import ETA, XI, L, LaplaceExponent

SEED = 20240611
CONTROL = (ModelParams(0.5, 0.05), MonomialKernel(3.0))   # finite-variance weights


def one(x):
    return np.ones_like(x)


def above_one(x):
    return (x >= 1).astype(float)


def one_to_two(x):
    return ((x >= 1) & (x <= 2)).astype(float)


# -- single paths ---------------------------------------------------------------------
def test_no_jump_limit(params, kernel):
    cfg = SimConfig(XI, start_level=0.3, horizon=2.0, rate_scale=1e-9, seed=1)
    r = simulate_path(params, kernel, cfg)
    assert r.n_jumps == 0
    assert r.final_level == pytest.approx(0.3 + 0.5 * 2.0, abs=1e-14)
    assert r.log_weight == pytest.approx(0.5 * 2.0, abs=1e-14)


def test_creeping_crossing(params, kernel):
    cfg = SimConfig(XI, start_level=-1.0, horizon=1.0, rate_scale=1e-9, seed=1)
    r = simulate_path(params, kernel, cfg)
    assert r.time_below == pytest.approx(0.5, abs=1e-14)
    assert r.time_above == pytest.approx(0.5, abs=1e-14)
    assert r.final_level == pytest.approx(0.25, abs=1e-14)
    assert any(abs(t - 0.5) < 1e-14 and a == 0.0 and b == 0.0 for t, a, b in r.events)


@settings(max_examples=15)
@given(st.integers(0, 2**32), st.integers(0, 500), st.sampled_from([XI, ETA]))
def test_path_structure(seed, index, process):
    params, kernel = ModelParams(2.0, 0.5), MonomialKernel(1.0)
    cfg = SimConfig(process, start_level=-0.5, horizon=8.0, seed=seed, n_paths=index + 1)
    r = simulate_path(params, kernel, cfg, index=index)
    t_prev, level = 0.0, -0.5
    for t, before, after in r.events:
        dt = t - t_prev
        # drift segments: slope a_minus below 0, a_plus above; crossings split segments
        slope = 2.0 if level < 0 else 0.5
        assert before == pytest.approx(level + slope * dt, abs=1e-9)
        if level < 0:
            assert before <= 1e-12
        assert after <= before
        if after == before:
            assert before == 0.0
        t_prev, level = t, after
    b = simulate_paths(params, kernel, cfg)
    assert b.final_level[index] == r.final_level
    assert b.n_jumps[index] == r.n_jumps


def test_events_csv(params, kernel):
    r = simulate_path(params, kernel, SimConfig(XI, horizon=3.0, seed=5), index=3)
    text = events_csv(r)
    assert text.splitlines()[0] == "time,level_before,level_after"
    assert len(text.splitlines()) == len(r.events) + 1


def test_reproducible(params, kernel):
    cfg = SimConfig(XI, horizon=5.0, seed=SEED, n_paths=2000)
    a, b = simulate_paths(params, kernel, cfg), simulate_paths(params, kernel, cfg)
    for name in ("final_level", "elapsed", "time_above", "time_below", "n_jumps", "status"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = simulate_paths(params, kernel, SimConfig(XI, horizon=5.0, seed=SEED + 1, n_paths=2000))
    assert not np.array_equal(a.final_level, c.final_level)


def test_weight_bound(params, kernel):
    t = 7.0
    b = simulate_paths(params, kernel, SimConfig(XI, start_level=-0.3, horizon=t, seed=3,
                                                 n_paths=20000))
    assert np.all(b.log_weight >= 0.5 * t - 1e-9)
    assert np.all(b.log_weight <= 2.0 * t + 1e-9)
    assert np.allclose(b.time_above + b.time_below, t)


def test_jump_count_poisson(params, kernel):
    t, rate = 10.0, kernel.moment(1)
    b = simulate_paths(params, kernel, SimConfig(XI, horizon=t, seed=SEED, n_paths=10000))
    n = b.n_jumps
    assert n.mean() == pytest.approx(rate * t, abs=3 * math.sqrt(rate * t / n.size))
    edges = np.arange(0, 13)
    obs = np.array([np.count_nonzero(n == k) for k in edges[:-1]] + [np.count_nonzero(n >= 12)])
    pmf = stats.poisson.pmf(edges[:-1], rate * t)
    exp = n.size * np.append(pmf, 1 - pmf.sum())
    p = stats.chisquare(obs, exp).pvalue
    assert p > 1e-3


# -- estimators -------------------------------------------------------------------------
def test_feynman_kac_constant(params, kernel):
    t = 3.0
    e = feynman_kac(params, kernel, one, t, 1.0, 100_000, SEED)
    assert e.within(math.exp(0.5 * t))


def test_feynman_kac_time_zero(params, kernel):
    e = feynman_kac(params, kernel, above_one, 0.0, 1.5, 10, SEED)
    assert e.value == 1.0 and e.stderr == 0.0


def test_feynman_kac_long_time(params, kernel):
    t = 8.0
    e = feynman_kac(params, kernel, above_one, t, 1.0, 400_000, SEED)
    s = math.exp(-0.5 * t)
    assert abs(e.value * s - 2 / 3) <= 3 * e.stderr * s


def test_tilted_vs_weighted(params, kernel):
    y, w = tilted_vs_weighted(params, kernel, one_to_two, 5.0, 1.0, 100_000, SEED)
    assert abs(y.value - w.value) <= 3 * math.hypot(y.stderr, w.stderr)
    y0, w0 = tilted_vs_weighted(params, kernel, one_to_two, 0.0, 1.5, 10, SEED)
    assert y0.value == w0.value == 1.0


def test_tilted_needs_recurrence(kernel):
    with pytest.raises(RegimeError):
        tilted_vs_weighted(ModelParams(0.9, 0.5), kernel, one, 1.0, 1.0, 10)


@pytest.mark.parametrize("t", [1.0, 5.0])
def test_martingale_mean(params, kernel, t):
    assert martingale_mean(params, kernel, t, 100_000, SEED).within(1.0)


@pytest.mark.parametrize("t", [1.0, 5.0, 10.0])
def test_martingale_mean_finite_variance_kernel(t):
    assert martingale_mean(*CONTROL, t, 100_000, SEED).within(1.0)


def test_L_at_malthus_exponent(params, kernel):
    e = estimate_L(params, kernel, 0.5, 100_000, seed=SEED)
    assert e.censored_fraction == 0.0
    assert e.within(1.0) and e.value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("method", ["tilted", "direct"])
def test_L_above_malthus_exponent(params, kernel, method):
    e = estimate_L(params, kernel, 1.5, 100_000, seed=SEED, method=method)
    assert e.within(L(params, kernel, 1.5))


def test_L_large_q(params, kernel):
    e = estimate_L(params, kernel, 50.0, 100_000, seed=SEED)
    assert e.value < 1e-3
    assert e.within(L(params, kernel, 50.0))


def test_L_rejects_small_q(params, kernel):
    with pytest.raises(ConfigError):
        estimate_L(params, kernel, 0.4, 10)
    with pytest.raises(ConfigError):
        estimate_L(params, kernel, 1.0, 10, method="other")


def test_occupation_masses_and_tail(params, kernel):
    edges = np.geomspace(1e-3, 1e3, 61)
    occ = occupation_histogram(params, kernel, 1e6, edges, seed=SEED)
    assert occ.mass_above_one == pytest.approx(2 / 3, abs=0.01)
    assert occ.mass_below_one == pytest.approx(1 / 3, abs=0.01)
    # log-density of the log-size above 0 decays like exp(-beta_plus y)
    lo = np.log(edges[:-1])
    sel = (lo >= 0) & (lo < 3.0)
    y_mid = 0.5 * (np.log(edges[1:]) + np.log(edges[:-1]))[sel]
    dens = occ.mass[sel] / np.diff(np.log(edges))[sel]
    slope = np.polyfit(y_mid, np.log(dens), 1)[0]
    assert slope == pytest.approx(-1.0, rel=0.02)


def test_occupation_bad_bins(params, kernel):
    with pytest.raises(ConfigError):
        occupation_histogram(params, kernel, 10.0, [1.0, 0.5])


def test_exit_probability(params, kernel):
    e = exit_probability(params, kernel, 1.0, 100_000, seed=SEED)
    exact = two_sided_exit(LaplaceExponent(2.0, ETA, kernel), 0.0, 1.0)
    assert e.within(exact)
