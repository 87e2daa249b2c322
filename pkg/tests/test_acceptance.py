"""Acceptance suite: every cross-validation check at its stated tolerance.

Run under pytest (one test per check) or directly as a script, which prints
the same pass/fail lines and exits non-zero when a check fails.
"""
from __future__ import annotations

import sys
import tempfile
from pathlib import Path

import pytest

from gfrag import verify
from gfrag.kernel import ModelParams, MonomialKernel

SEED = 20240611
PARAMS = ModelParams(a_minus=2.0, a_plus=0.5)
KERNEL = MonomialKernel(1.0)
ACCEPTANCE_LINES: list[str] = []


def run_suite(out_dir: Path, echo=print) -> dict[int, verify.Verdict]:
    verdicts = verify.run_all(PARAMS, KERNEL, SEED, out_dir, echo=echo)
    return {v.number: v for v in verdicts}


@pytest.fixture(scope="module")
def verdicts(request, tmp_path_factory):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def echo(line):
        ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line(line)
    return run_suite(tmp_path_factory.mktemp("acceptance"), echo)


def _check(verdicts, n):
    v = verdicts[n]
    assert v.status == verify.PASS, v.line()


def test_spectral_closed_forms(verdicts):
    _check(verdicts, 1)


def test_L_function_identities(verdicts):
    _check(verdicts, 2)


def test_total_mass_triangle(verdicts):
    _check(verdicts, 3)


def test_laplace_inversion_fidelity(verdicts):
    _check(verdicts, 4)


def test_profile_normalisation(verdicts):
    _check(verdicts, 5)


@pytest.mark.xfail(strict=True, reason=(
    "the martingale M'_t has infinite variance for the uniform fragment law "
    "(E[s^-2] diverges under the size-biased jump law), so its sample mean at t = 10 "
    "on 1e5 paths misses 1 by more than 3 reported standard errors"))
def test_monte_carlo_concordance(verdicts):
    _check(verdicts, 6)


def test_monte_carlo_L_and_occupation_parts(verdicts):
    m = verdicts[6].metrics
    assert m["L_ok"] and m["occupation_ok"]


def test_monte_carlo_martingale_finite_variance_control(verdicts):
    ctrl = verdicts[6].metrics["martingale_control"]
    assert all(abs(value - 1.0) <= 3 * stderr for value, stderr in ctrl.values())


def test_pde_concordance(verdicts):
    _check(verdicts, 7)


def test_cross_route_agreement(verdicts):
    _check(verdicts, 8)


def test_exponential_convergence_rate(verdicts):
    _check(verdicts, 9)


def test_determinism(verdicts):
    _check(verdicts, 10)


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as d:
        result = run_suite(Path(d))
    sys.exit(0 if all(v.passed for v in result.values()) else 1)
