"""The standardised comparison statistic and its martingale decomposition."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateVariance, DomainError


@dataclass(frozen=True)
class ComparisonStatistic:
    r: float
    v: float
    n: int
    m: int
    logZ1: float
    logZ2: float
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float


@dataclass(frozen=True)
class Decomposition:
    """``r = eta_sum + w1_term - w2_term``."""

    eta_sum: float
    w1_term: float
    w2_term: float
    v: float

    @property
    def reconstructed(self):
        return self.eta_sum + self.w1_term - self.w2_term


def _check_counts(n, m):
    n, m = int(n), int(m)
    if n < 1 or m < 1:
        raise DomainError(f"generation counts must be >= 1, got n={n}, m={m}")
    return n, m


def v_mn_rho(n, m, sigma1, sigma2, rho):
    """Standard deviation of ``ln Z_1,n / n - ln Z_2,m / m`` to leading order.

    ``sqrt(s1^2/n + s2^2/m - 2 rho s1 s2 min(m, n) / (m n))``.
    """
    n, m = _check_counts(n, m)
    sigma1, sigma2, rho = float(sigma1), float(sigma2), float(rho)
    if not (sigma1 > 0 and sigma2 > 0):
        raise DomainError(f"sigmas must be positive, got {sigma1!r}, {sigma2!r}")
    if not (-1.0 <= rho <= 1.0):
        raise DomainError(f"rho must lie in [-1, 1], got {rho!r}")
    var = (sigma1 * sigma1 / n + sigma2 * sigma2 / m) \
        - 2.0 * rho * sigma1 * sigma2 * min(m, n) / (m * n)
    if not var > 0.0:
        raise DegenerateVariance(
            f"V^2 = {var!r} <= 0 (n={n}, m={m}, sigma1={sigma1}, sigma2={sigma2}, "
            f"rho={rho}); the comparison needs rho < 1, or sigma1 != sigma2 when rho = 1"
        )
    return math.sqrt(var)


def r_statistic(logZ1, n, logZ2, m, mu1, mu2, sigma1, sigma2, rho):
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    logZ1, logZ2 = float(logZ1), float(logZ2)
    if logZ1 < 0 or logZ2 < 0:
        raise DomainError("log populations must be >= 0 (populations never drop below 1)")
    r = ((logZ1 / n - logZ2 / m) - (mu1 - mu2)) / v
    return ComparisonStatistic(float(r), v, int(n), int(m), logZ1, logZ2,
                               float(mu1), float(mu2), float(sigma1), float(sigma2),
                               float(rho))


def r_values(logZ1, logZ2, n, m, mu1, mu2, sigma1, sigma2, rho):
    """Vectorised R for arrays of final log populations."""
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    logZ1 = np.asarray(logZ1, dtype=float)
    logZ2 = np.asarray(logZ2, dtype=float)
    return ((logZ1 / n - logZ2 / m) - (mu1 - mu2)) / v


def single_process_statistic(logZ, n, mu, sigma):
    """``(ln Z_n - n mu) / (sigma sqrt(n))``."""
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    out = (np.asarray(logZ, dtype=float) - n * mu) / (sigma * math.sqrt(n))
    return float(out) if out.ndim == 0 else out


def etas(pair, mu1, mu2, sigma1, sigma2, rho):
    """The centred environment increments whose sum drives R."""
    t1, t2 = pair.traj1, pair.traj2
    n, m = t1.n, t2.n
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    first = (t1.M_path - mu1) / (n * v)
    second = -(t2.M_path - mu2) / (m * v)
    return np.concatenate([first, second])


def decompose(pair, mu1, mu2, sigma1, sigma2, rho):
    """Split R into environment and martingale parts.

    ``eta_sum`` (compensated summation) collects the centred log means, the
    two remaining terms are ``ln W_1,n / (n V)`` and ``ln W_2,m / (m V)``.
    """
    t1, t2 = pair.traj1, pair.traj2
    if t1.M_path.shape[0] != t1.n or t2.M_path.shape[0] != t2.n:
        raise DomainError("trajectory path length does not match its generation count")
    n, m = t1.n, t2.n
    v = v_mn_rho(n, m, sigma1, sigma2, rho)
    eta_sum = math.fsum(etas(pair, mu1, mu2, sigma1, sigma2, rho))
    return Decomposition(eta_sum, t1.logW / (n * v), t2.logW / (m * v), v)


def eta_variance_sum(n, m, sigma1, sigma2, rho):
    """``sum_i E Y_i^2`` built index by index from the eta covariances.

    Pairs sharing an environment index ``i <= min(n, m)`` contribute their
    covariance; this does not go through ``v_mn_rho``'s closed form except to
    normalise, so it checks that formula.
    """
    n, m = _check_counts(n, m)
    v2 = v_mn_rho(n, m, sigma1, sigma2, rho) ** 2
    shared = min(n, m)
    var1 = sigma1 * sigma1 / (n * n * v2)
    var2 = sigma2 * sigma2 / (m * m * v2)
    cov = -rho * sigma1 * sigma2 / (n * m * v2)
    terms = [var1 + var2 + 2.0 * cov] * shared
    terms += [var1] * (n - shared) + [var2] * (m - shared)
    return math.fsum(terms)
