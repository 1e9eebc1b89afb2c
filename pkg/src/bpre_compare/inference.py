"""Confidence intervals and the equality test for the criticality parameters.

The intervals are asymptotic.  Their nominal level is trusted only while
``|ln kappa|`` is small against the sample size; two advisory thresholds are
checked and reported in ``warnings`` (never raised as errors):

* ``|ln kappa| > ln(min(m, n))`` - the Berry-Esseen route is unsupported;
* ``|ln kappa| > min(m, n) ** (1/3)`` - the moderate-deviation route is too.

These cut-offs are heuristics for conditions that are only stated as
``o(.)`` rates.
"""

import enum
import json
import math
import warnings
from dataclasses import dataclass, field

from .exceptions import DomainError, ValidityWarning
from .special import chi2_quantile_1df, phi_cdf, phi_quantile
from .statistic import v_mn_rho


class Method(enum.Enum):
    MU_DIFF = "MuDiff"
    SIGMA_SQ = "SigmaSq"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    level: float
    method: Method
    inputs: dict = field(default_factory=dict)
    warnings: tuple = ()

    def __contains__(self, value):
        return self.lo <= value <= self.hi

    @property
    def width(self):
        return self.hi - self.lo

    def to_record(self):
        return {
            "method": self.method.value,
            "lo": self.lo,
            "hi": self.hi,
            "level": self.level,
            "inputs": dict(self.inputs),
            "warnings": list(self.warnings),
        }

    def to_json(self):
        return json.dumps(self.to_record(), sort_keys=True)


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    reject_at: float
    decision: bool
    inputs: dict = field(default_factory=dict)
    warnings: tuple = ()

    __test__ = False  # not a pytest class

    def to_record(self):
        return {
            "method": "MuEqualTest",
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject_at": self.reject_at,
            "decision": self.decision,
            "inputs": dict(self.inputs),
            "warnings": list(self.warnings),
        }


def _check_kappa(kappa, name="kappa"):
    kappa = float(kappa)
    if not (0.0 < kappa < 1.0):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {kappa!r}")
    return kappa


def validity_warnings(kappa, n, m):
    """Advisory messages for the two asymptotic validity heuristics."""
    size = min(int(n), int(m))
    lk = abs(math.log(kappa))
    out = []
    if lk > math.log(size):
        out.append(f"B1: |ln kappa| = {lk:.4g} exceeds ln(min(m,n)) = {math.log(size):.4g}")
    if lk > size ** (1.0 / 3.0):
        out.append(f"B2: |ln kappa| = {lk:.4g} exceeds min(m,n)^(1/3) = {size ** (1 / 3):.4g}")
    if out:
        warnings.warn("; ".join(out), ValidityWarning, stacklevel=3)
    return tuple(out)


def ci_mu_diff(logZ1, n, logZ2, m, sigma1, sigma2, rho, kappa):
    """Interval for ``mu1 - mu2`` at level ``1 - kappa``.

    ``center -+ V * Phi^{-1}(1 - kappa/2)`` with ``center = ln Z1/n - ln Z2/m``.
    """
    kappa = _check_kappa(kappa)
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    center = float(logZ1) / n - float(logZ2) / m
    half = v * phi_quantile(1.0 - kappa / 2.0)
    inputs = {"logZ1": float(logZ1), "n": int(n), "logZ2": float(logZ2), "m": int(m),
              "sigma1": float(sigma1), "sigma2": float(sigma2), "rho": float(rho),
              "kappa": kappa}
    return Interval(center - half, center + half, 1.0 - kappa, Method.MU_DIFF, inputs,
                    validity_warnings(kappa, n, m))


def ci_sigma_sq(logZ1, logZ2, n, kappa, independent_copies=False):
    """Interval for ``sigma1^2`` from two independent copies observed to ``n``.

    Only valid when process 2 is an independent copy of process 1, which the
    caller must attest with ``independent_copies=True``.
    """
    if not independent_copies:
        raise DomainError(
            "ci_sigma_sq is only valid for two independent copies of the same process; "
            "pass independent_copies=True to attest this design"
        )
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    kappa = _check_kappa(kappa)
    d = float(logZ1) - float(logZ2)
    inputs = {"logZ1": float(logZ1), "logZ2": float(logZ2), "n": n, "kappa": kappa}
    notes = validity_warnings(kappa, n, n)
    if d == 0.0:
        msg = "degenerate observation: ln Z1 == ln Z2 gives the empty-width interval [0, 0]"
        warnings.warn(msg, ValidityWarning, stacklevel=2)
        return Interval(0.0, 0.0, 1.0 - kappa, Method.SIGMA_SQ, inputs, notes + (msg,))
    d2 = d * d
    lo = d2 / (2.0 * n * chi2_quantile_1df(1.0 - kappa / 2.0))
    hi = d2 / (2.0 * n * chi2_quantile_1df(kappa / 2.0))
    return Interval(lo, hi, 1.0 - kappa, Method.SIGMA_SQ, inputs, notes)


def test_mu_equal(logZ1, n, logZ2, m, sigma1, sigma2, rho, level):
    """Two-sided test of ``mu1 = mu2``; rejects when ``p_value < level``."""
    level = _check_kappa(level, "level")
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    stat = (float(logZ1) / n - float(logZ2) / m) / v
    p_value = 2.0 * phi_cdf(-abs(stat))
    inputs = {"logZ1": float(logZ1), "n": int(n), "logZ2": float(logZ2), "m": int(m),
              "sigma1": float(sigma1), "sigma2": float(sigma2), "rho": float(rho)}
    return TestResult(stat, p_value, level, p_value < level, inputs,
                      validity_warnings(level, n, m))


test_mu_equal.__test__ = False
