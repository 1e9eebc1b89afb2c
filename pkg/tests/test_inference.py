import json
import math
import warnings

import pytest
from hypothesis import assume, given, strategies as st

from bpre_compare.exceptions import DegenerateVariance, DomainError, ValidityWarning
from bpre_compare.inference import Method, ci_mu_diff, ci_sigma_sq, test_mu_equal
from bpre_compare.special import phi_cdf

kappas = st.floats(1e-4, 0.9)
logz = st.floats(0, 5000)
counts = st.integers(30, 5000)
sigmas = st.floats(0.05, 3)
rhos = st.floats(-1, 0.95)


@pytest.fixture(autouse=True)
def quiet_validity():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        yield


def test_mu_diff_worked_example():
    iv = ci_mu_diff(105, 100, 98, 100, 1, 1, 0, 0.05)
    assert (iv.lo + iv.hi) / 2 == pytest.approx(0.07, abs=1e-12)
    assert (iv.hi - iv.lo) / 2 == pytest.approx(0.1414214 * 1.959964, abs=1e-6)
    assert (iv.lo, iv.hi) == pytest.approx((-0.2072, 0.3472), abs=1e-4)
    assert iv.level == 0.95 and iv.method is Method.MU_DIFF


def test_mu_diff_collapses_as_kappa_to_one():
    iv = ci_mu_diff(105, 100, 98, 100, 1, 1, 0, 1 - 1e-12)
    assert iv.width < 1e-11
    assert iv.lo == pytest.approx(0.07, abs=1e-11)


@pytest.mark.parametrize("kappa", [0.0, 1.0, -0.1, 2.0])
def test_kappa_domain(kappa):
    with pytest.raises(DomainError):
        ci_mu_diff(1, 10, 1, 10, 1, 1, 0, kappa)
    with pytest.raises(DomainError):
        ci_sigma_sq(1, 0, 10, kappa, independent_copies=True)


def test_degenerate_variance_propagates():
    with pytest.raises(DegenerateVariance):
        ci_mu_diff(1, 10, 1, 10, 1, 1, 1, 0.05)


def test_sigma_sq_worked_example():
    iv = ci_sigma_sq(2.0, 0.0, 100, 0.05, independent_copies=True)
    assert iv.lo == pytest.approx(4 / (200 * 5.0239), rel=1e-4)
    assert iv.lo == pytest.approx(0.003981, abs=1e-6)
    assert iv.hi == pytest.approx(20.37, abs=0.01)
    assert iv.method is Method.SIGMA_SQ


def test_sigma_sq_requires_attestation():
    with pytest.raises(DomainError, match="independent"):
        ci_sigma_sq(2.0, 0.0, 100, 0.05)


def test_sigma_sq_zero_difference():
    with pytest.warns(ValidityWarning, match="degenerate"):
        iv = ci_sigma_sq(3.0, 3.0, 100, 0.05, independent_copies=True)
    assert (iv.lo, iv.hi) == (0.0, 0.0)
    assert any("degenerate" in w for w in iv.warnings)


@given(logz, logz, counts, kappas)
def test_sigma_sq_homogeneity(z1, z2, n, kappa):
    assume(z1 != z2)
    a = ci_sigma_sq(z1, z2, n, kappa, independent_copies=True)
    b = ci_sigma_sq(z2 + 2 * (z1 - z2), z2, n, kappa, independent_copies=True)
    assert 0 <= a.lo <= a.hi
    assert b.lo == pytest.approx(4 * a.lo, rel=1e-12)
    assert b.hi == pytest.approx(4 * a.hi, rel=1e-12)


def test_test_examples():
    res = test_mu_equal(50.0, 100, 25.0, 50, 1, 1, 0, 0.05)
    assert res.statistic == 0 and res.p_value == 1.0 and not res.decision
    # choose logZ1 so the statistic is 1.959964
    v = math.sqrt(0.02)
    res = test_mu_equal(100 * 1.959964 * v, 100, 0.0, 100, 1, 1, 0, 0.05)
    assert res.statistic == pytest.approx(1.959964, abs=1e-12)
    assert res.p_value == pytest.approx(0.05, abs=1e-6)
    assert res.p_value == pytest.approx(2 * (1 - phi_cdf(res.statistic)), abs=1e-15)


@given(logz, counts, logz, counts, sigmas, sigmas, rhos, kappas)
def test_ci_test_duality(z1, n, z2, m, s1, s2, rho, kappa):
    try:
        iv = ci_mu_diff(z1, n, z2, m, s1, s2, rho, kappa)
    except DegenerateVariance:
        return
    res = test_mu_equal(z1, n, z2, m, s1, s2, rho, kappa)
    # skip inputs within rounding of the boundary
    assume(min(abs(iv.lo), abs(iv.hi)) > 1e-9 * max(1.0, iv.width))
    assert res.decision == (0.0 not in iv)
    assert res.decision == (res.p_value < kappa)


@given(logz, logz, st.integers(30, 2000), sigmas, sigmas, rhos, kappas)
def test_width_monotone(z1, z2, n, s1, s2, rho, kappa):
    try:
        small = ci_mu_diff(z1, n, z2, n, s1, s2, rho, kappa)
        large = ci_mu_diff(z1, 2 * n, z2, 2 * n, s1, s2, rho, kappa)
        tighter = ci_mu_diff(z1, n, z2, n, s1, s2, rho, min(0.99, kappa * 2))
    except DegenerateVariance:
        return
    assert large.width < small.width
    assert tighter.width <= small.width


def test_smaller_kappa_gives_wider_interval():
    a = ci_mu_diff(105, 100, 98, 100, 1, 1, 0, 0.05)
    b = ci_mu_diff(105, 100, 98, 100, 1, 1, 0, 0.01)
    assert b.lo < a.lo and b.hi > a.hi


def test_validity_warnings():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        quiet = ci_mu_diff(105, 1000, 98, 1000, 1, 1, 0, 0.05)
        loud = ci_mu_diff(105, 20, 98, 20, 1, 1, 0, 1e-4)
    assert quiet.warnings == ()
    assert len(loud.warnings) == 2
    assert loud.warnings[0].startswith("B1") and loud.warnings[1].startswith("B2")
    assert any(issubclass(w.category, ValidityWarning) for w in rec)
    # |ln 0.004| = 5.52 exceeds ln 200 = 5.30 but not 200^(1/3) = 5.85
    only_b1 = ci_mu_diff(105, 200, 98, 200, 1, 1, 0, 0.004)
    assert [w[:2] for w in only_b1.warnings] == ["B1"]


def test_json_record():
    iv = ci_mu_diff(105, 100, 98, 100, 1, 1, 0, 0.05)
    rec = json.loads(iv.to_json())
    assert set(rec) == {"method", "lo", "hi", "level", "inputs", "warnings"}
    assert rec["method"] == "MuDiff" and rec["inputs"]["logZ1"] == 105.0
