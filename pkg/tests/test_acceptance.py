"""One test per acceptance criterion, at the stated tolerances and sizes."""

import subprocess
import sys

import pytest

from ctrw_fdd import checks

CFG = checks.VerifyConfig.make(quick=False)


def assert_check(res):
    lines = [f"{r[1]}: value {r[2]:.6g} ref {r[3]:.6g} err {r[4]:.3g} tol {r[5]:.3g}" for r in res.failures]
    assert res.rows, "no rows"
    assert not lines, "\n".join(lines[:20]) + (f"\n{res.notes}" if res.notes else "")
    assert res.seconds <= res.budget, f"{res.seconds:.1f} s over the {res.budget} s budget"


def test_criterion_1_stable_core():
    assert_check(checks.check_stable_core(CFG))


def test_criterion_2_potential_identity():
    assert_check(checks.check_potential_identity(CFG))


def test_criterion_3_mass_conservation():
    assert_check(checks.check_mass(CFG))


def test_criterion_4_chapman_kolmogorov():
    assert_check(checks.check_chapman_kolmogorov(CFG))


def test_criterion_5_two_time_law_vs_monte_carlo():
    assert_check(checks.check_two_time_mc(CFG))


def test_criterion_6_marginals():
    assert_check(checks.check_marginals(CFG))


def test_criterion_7_age_law():
    assert_check(checks.check_age_law(CFG))


def test_criterion_8_prelimit_convergence():
    assert_check(checks.check_prelimit(CFG))


def test_criterion_9_determinism(tmp_path):
    out = []
    for k in (1, 2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        subprocess.run([sys.executable, "-m", "ctrw_fdd.cli", "verify", "--quick", "-o", "verify.csv"],
                       cwd=d, capture_output=True, timeout=900)
        out.append((d / "verify.csv").read_bytes())
    assert out[0] and out[0] == out[1]
