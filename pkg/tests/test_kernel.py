from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gfrag.errors import DomainError
from gfrag.kernel import (X_TYPE, Y_TYPE, ModelParams, MonomialKernel, TabulatedKernel,
                          kernel_from_config)

gammas = st.floats(1.0, 4.0)


def test_monomial_moments():
    k = MonomialKernel(1.0)
    assert k.moment(0) == pytest.approx(1.0)
    assert k.moment(1) == pytest.approx(0.5)
    assert k.moment(-0.5) == pytest.approx(2.0)
    assert MonomialKernel(2.0).moment(1) == pytest.approx(1 / 3)


def test_log_moment_and_rates():
    k = MonomialKernel(1.0)
    assert k.log_moment() == pytest.approx(-1.0)
    assert k.total_rates() == pytest.approx((0.5, 1.0))
    assert k.lambda_star() == pytest.approx(0.5)
    assert MonomialKernel(2.0).lambda_star() == pytest.approx(1 / 6)
    assert MonomialKernel(3.0).lambda_star() == pytest.approx(1 / 12)


def test_flat_table_matches_uniform():
    s = np.linspace(1e-3, 1 - 1e-3, 1001)
    k = TabulatedKernel(s, np.ones_like(s), epsilon=0.5)
    assert abs(k.moment(1) - 0.5) < 1e-8
    assert k.log_moment() == pytest.approx(-1.0, abs=1e-8)


@pytest.mark.parametrize("gamma, kind, u", [(1.0, X_TYPE, 0.25), (1.0, Y_TYPE, 0.5),
                                            (2.0, Y_TYPE, 0.25)])
def test_sample_jump_quantiles(gamma, kind, u):
    assert MonomialKernel(gamma).sample_jump(kind, u) == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("q", [-0.4, 0.0, 0.7, 1.0, 3.5])
@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0])
def test_moments_against_quadrature(gamma, q):
    k = MonomialKernel(gamma)
    assert k.moment(q) == pytest.approx(k.quad_moment(q), rel=1e-8)
    assert k.moment_log(q) == pytest.approx(k.quad_moment(q, log_power=1), rel=1e-8)


@pytest.mark.parametrize("q", [-0.4, 0.3, 1.0, 2.5])
def test_table_moments_against_quadrature(q):
    s = np.array([0.1, 0.3, 0.6, 0.9])
    k = TabulatedKernel(s, np.array([2.0, 0.5, 1.5, 1.0]), epsilon=0.5)
    assert k.moment(q) == pytest.approx(k.quad_moment(q), rel=1e-8)
    assert k.moment_log(q) == pytest.approx(k.quad_moment(q, log_power=1), rel=1e-8)


@pytest.mark.parametrize("kind", [X_TYPE, Y_TYPE])
def test_table_jump_law_ecdf(kind):
    s = np.array([0.1, 0.3, 0.6, 0.9])
    k = TabulatedKernel(s, np.array([2.0, 0.5, 1.5, 1.0]), epsilon=0.5)
    u = np.random.default_rng(7).random(200_000)
    draws = np.exp(np.array([k.sample_jump(kind, ui) for ui in u[:2000]]))
    grid = np.linspace(0.05, 0.95, 19)
    ecdf = np.searchsorted(np.sort(draws), grid) / draws.size
    assert np.max(np.abs(ecdf - k.jump_cdf(kind, grid))) < 0.04


@pytest.mark.parametrize("gamma", [1.0, 2.5])
@pytest.mark.parametrize("kind", [X_TYPE, Y_TYPE])
def test_monomial_jump_law_ecdf(gamma, kind):
    k = MonomialKernel(gamma)
    u = np.random.default_rng(11).random(1_000_000)
    draws = np.sort(np.exp(k.sample_jump(kind, u)))
    grid = np.linspace(0.01, 0.99, 99)
    ecdf = np.searchsorted(draws, grid) / draws.size
    assert np.max(np.abs(ecdf - k.jump_cdf(kind, grid))) < 0.005


@given(gammas, st.floats(-0.45, 5.0), st.floats(0.01, 3.0))
def test_moment_decreasing(gamma, q, dq):
    k = MonomialKernel(gamma)
    assert k.moment(q + dq) < k.moment(q)


@given(gammas, st.floats(-0.45, 5.0), st.floats(0.01, 2.0))
def test_moment_log_convex(gamma, q, dq):
    k = MonomialKernel(gamma)
    mid = math.log(k.moment(q + dq))
    assert mid <= 0.5 * (math.log(k.moment(q)) + math.log(k.moment(q + 2 * dq))) + 1e-12


def test_validation():
    with pytest.raises(DomainError):
        MonomialKernel(0.5)
    with pytest.raises(DomainError):
        MonomialKernel(1.0, epsilon=1.5)
    with pytest.raises(DomainError):
        MonomialKernel(1.0).moment(-1.5)
    with pytest.raises(DomainError):
        TabulatedKernel([0.5, 0.2], [1.0, 1.0], epsilon=0.5)
    with pytest.raises(DomainError):
        TabulatedKernel([0.2, 0.5], [-1.0, 1.0], epsilon=0.5)
    with pytest.raises(DomainError):
        ModelParams(0.5, 2.0)
    with pytest.raises(DomainError):
        ModelParams(0.0, 0.0)


def test_kernel_from_config():
    k = kernel_from_config({"type": "monomial", "gamma": 2.0}, 0.5)
    assert k.lambda_star() == pytest.approx(1 / 6)
    t = kernel_from_config({"type": "table", "s": [0.1, 0.9], "rho": [1.0, 1.0]}, 0.5)
    assert t.moment(0) == pytest.approx(1.0)
