from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from gfrag.errors import NoConvergence
from gfrag.roots import expand_right, safeguarded_root


def test_simple_root_with_derivative():
    r = safeguarded_root(lambda x: x * x - 2, 0.0, 2.0, df=lambda x: 2 * x)
    assert r == pytest.approx(math.sqrt(2), abs=1e-12)


def test_same_sign_bracket_rejected():
    with pytest.raises(ValueError):
        safeguarded_root(lambda x: x * x + 1, -1.0, 1.0)


def test_iteration_limit():
    with pytest.raises(NoConvergence):
        safeguarded_root(lambda x: math.tanh(100 * (x - 0.3)), 0.0, 1.0, ftol=0.0, max_iter=2)


@given(st.floats(0.1, 20.0), st.floats(-5.0, 5.0))
def test_matches_brentq(k, c):
    f = lambda x: math.exp(k * x) - 1 - k * x - c * c - 0.01
    hi = expand_right(f, 0.0)
    assert f(hi) >= 0
    ours = safeguarded_root(f, 0.0, hi, ftol=1e-13)
    ref = brentq(f, 0.0, hi, xtol=1e-15)
    assert ours == pytest.approx(ref, rel=1e-9, abs=1e-12)
