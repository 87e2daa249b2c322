from __future__ import annotations

import mpmath
import numpy as np
import pytest

from gfrag.errors import InversionError
from gfrag.laplace import gaver_stehfest, invert, talbot

T = np.array([0.5, 1.0, 2.0, 5.0])


def _exp_transform(s):
    return 1 / (s + 1)


def _ramp_transform(s):
    return 1 / (s * s)


@pytest.mark.parametrize("F, f", [(_exp_transform, lambda t: np.exp(-t)),
                                  (_ramp_transform, lambda t: t)])
def test_known_pairs(F, f):
    assert np.allclose(talbot(F, T), f(T), rtol=1e-10)
    assert np.allclose(gaver_stehfest(F, T), f(T), rtol=1e-8)
    assert np.allclose(invert(F, T), f(T), rtol=1e-10)


def test_shifted_contour():
    # e^{t} has its pole at s = 1, right of the default contour
    F = lambda s: 1 / (s - 1)
    assert talbot(F, 2.0, shift=2.0)[0] == pytest.approx(np.exp(2.0), rel=1e-9)


def test_step_function_disagreement():
    # transform of the unit step at t = 1: the two routes disagree near the jump
    def F(s):
        if isinstance(s, mpmath.mpf):
            return mpmath.exp(-s) / s
        return np.exp(-s) / s
    with pytest.raises(InversionError):
        invert(F, [0.9, 1.1])


def test_bad_arguments():
    with pytest.raises(ValueError):
        talbot(_exp_transform, 0.0)
    with pytest.raises(ValueError):
        gaver_stehfest(_exp_transform, 1.0, n_terms=15)
