"""Monte Carlo diagnostics of the law of R against the standard normal.

Every diagnostic works on a :class:`SampleSet` (sorted draws) and is a single
pass over the sorted values.  :func:`run_suite` bundles them into a
:class:`VerificationReport` whose checks carry explicit envelopes:

=================  ==========================================================
ks                 ``<= max(0.01, 1.95/sqrt(N))``  (DKW bound at 0.999)
w1                 ``<= max(0.02, 3/sqrt(N))``
profile            ``<= max(0.05, 4/sqrt(N))`` at every grid point
tail / mirrored    ``[min(0.8, 1 - 3.5 se), max(1.25, 1 + 3.5 se)]``
ladder_ks          ``ks_k <= ks_{k-1} + 3 sqrt(2) * 0.5/sqrt(N)``
ladder_w1          ``w1_k <= w1_{k-1} + 3 sqrt(2) * 1/sqrt(N)``
coverage, size     ``target +- max(0.01, 3.5 se)``
=================  ==========================================================

``0.5/sqrt(N)`` bounds the standard deviation of an empirical CDF value, and
``1/sqrt(N)`` that of the W1 distance for a unit-variance law.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .environment import env_moments, pair_correlation
from .exceptions import DomainError, InsufficientSamples, ValidityWarning
from .rng import RandomStream
from .simulation import simulate_endpoints
from .special import phi_cdf, phi_cdf_array, phi_quantile, phi_quantile_array, chi2_quantile_1df
from .statistic import r_values, single_process_statistic, v_mn_rho

MIN_SAMPLES = 100
MIN_TAIL_COUNT = 50
DEFAULT_DELTA_PRIME = 0.5
PROFILE_GRID = np.round(np.arange(-50, 51) / 10.0, 1)
DEFAULT_TAIL_GRID = tuple(round(k / 10.0, 1) for k in range(21))
DEFAULT_LADDER = (250, 1000, 4000)
SUITES = ("clt", "berry-esseen", "tails", "coverage", "all")


@dataclass(frozen=True)
class TrueParameters:
    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float


def true_parameters(cfg, quad_order=64):
    """Quadrature values of the criticality parameters for ``cfg``'s families."""
    p1 = env_moments(cfg.family1, quad_order)
    p2 = env_moments(cfg.family2, quad_order)
    rho = pair_correlation(cfg.family1, cfg.family2, cfg.latent_r, quad_order).rho
    return TrueParameters(p1.mu, p2.mu, p1.sigma, p2.sigma, rho)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Sorted realisations of a statistic, tagged with their origin."""

    values: np.ndarray
    n: int = 0
    m: int = 0
    cfg_hash: str = ""

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.shape[0] < MIN_SAMPLES:
            raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise DomainError("samples must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    @classmethod
    def from_values(cls, values, n=0, m=0, cfg_hash=""):
        return cls(values, n, m, cfg_hash)

    @classmethod
    def from_config(cls, cfg, workers=None, params=None, quad_order=64):
        """Simulate ``cfg.replications`` pairs and standardise them into R."""
        params = params or true_parameters(cfg, quad_order)
        ends = simulate_endpoints(cfg, workers)
        r = r_values(ends.logZ1, ends.logZ2, cfg.n, cfg.m, params.mu1, params.mu2,
                     params.sigma1, params.sigma2, params.rho)
        return cls(r, cfg.n, cfg.m, cfg.digest())

    @classmethod
    def single_process(cls, cfg, workers=None, quad_order=64):
        """The m -> infinity limit: ``(ln Z_1,n - n mu1)/(sigma1 sqrt(n))``."""
        p1 = env_moments(cfg.family1, quad_order)
        ends = simulate_endpoints(cfg, workers)
        vals = single_process_statistic(ends.logZ1, cfg.n, p1.mu, p1.sigma)
        return cls(vals, cfg.n, 0, cfg.digest())

    @classmethod
    def normal(cls, size, seed=0):
        """True standard normal draws, used to calibrate the harness."""
        return cls(RandomStream(seed, 0).normal(int(size)), 0, 0, f"normal:{int(seed)}")

    def negated(self):
        return SampleSet(-self.values, self.n, self.m, self.cfg_hash)


# --------------------------------------------------------------------------
# diagnostics

def ecdf(s, x):
    """Right-continuous empirical CDF of ``s`` at the points ``x``."""
    x = np.asarray(x, dtype=float)
    return np.searchsorted(s.values, x, side="right") / len(s)


def ks_distance(s):
    v = s.values
    n = v.shape[0]
    if n < MIN_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
    f = phi_cdf_array(v)
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f))))


def _check_delta_prime(delta_prime):
    delta_prime = float(delta_prime)
    if not (0.0 < delta_prime < 1.0):
        raise DomainError(f"delta_prime must lie in (0, 1), got {delta_prime!r}")
    return delta_prime


def nonuniform_profile(s, delta_prime=DEFAULT_DELTA_PRIME, grid=PROFILE_GRID):
    """``(x, |F(x) - Phi(x)| * (1 + |x|^(1 + delta_prime)))`` along ``grid``."""
    delta_prime = _check_delta_prime(delta_prime)
    x = np.asarray(grid, dtype=float)
    gap = np.abs(ecdf(s, x) - phi_cdf_array(x)) * (1.0 + np.abs(x) ** (1.0 + delta_prime))
    return [(float(a), float(b)) for a, b in zip(x, gap)]


@dataclass(frozen=True)
class TailPoint:
    x: float
    ratio: float
    mirrored: float
    se: float


def tail_ratio_curve(s, x_grid=DEFAULT_TAIL_GRID, min_expected=MIN_TAIL_COUNT):
    """Empirical over normal tail probability on both sides of the origin.

    Grid points where the expected tail count ``N (1 - Phi(x))`` is below
    ``min_expected`` are dropped with a :class:`ValidityWarning`.
    """
    v = s.values
    n = v.shape[0]
    out, dropped = [], []
    for x in x_grid:
        x = float(x)
        if x < 0 or not math.isfinite(x):
            raise DomainError(f"tail grid points must be finite and >= 0, got {x!r}")
        p = phi_cdf(-x)
        if n * p < min_expected:
            dropped.append(x)
            continue
        upper = (n - np.searchsorted(v, x, side="left")) / n
        lower = np.searchsorted(v, -x, side="right") / n
        se = math.sqrt(p * (1.0 - p) / n) / p
        out.append(TailPoint(x, float(upper / p), float(lower / p), se))
    if dropped:
        warnings.warn(f"tail grid points {dropped} excluded: expected count below {min_expected}",
                      ValidityWarning, stacklevel=2)
    return out


def _normal_partial(x):
    # antiderivative of Phi
    return x * phi_cdf_array(x) + np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def wasserstein1(s):
    """``int |F(x) - Phi(x)| dx`` integrated exactly.

    The empirical CDF is a step function, so each gap between consecutive
    samples is integrated in closed form through the antiderivative of Phi,
    split at the crossing point ``Phi^{-1}(c)`` when it falls inside.  Both
    tails beyond the sample range are closed-form as well.
    """
    v = s.values
    n = v.shape[0]
    gv = _normal_partial(v)
    total = float(gv[0]) + float(_normal_partial(np.array([-v[-1]]))[0])
    if n == 1:
        return total
    a, b = v[:-1], v[1:]
    ga, gb = gv[:-1], gv[1:]
    c = np.arange(1, n) / n
    whole = np.abs(c * (b - a) - (gb - ga))
    cross = phi_quantile_array(c)
    inside = (a < cross) & (cross < b)
    if np.any(inside):
        xs, ci = cross[inside], c[inside]
        gx = _normal_partial(xs)
        left = np.abs(ci * (xs - a[inside]) - (gx - ga[inside]))
        right = np.abs(ci * (b[inside] - xs) - (gb[inside] - gx))
        whole[inside] = left + right
    return total + float(np.sum(whole))


def coverage_study(cfg, kappa, which="MuDiff", workers=None, quad_order=64):
    """Fraction of ``cfg.replications`` intervals covering the true parameter."""
    kappa = float(kappa)
    if not (0.0 < kappa < 1.0):
        raise DomainError(f"kappa must lie in (0, 1), got {kappa!r}")
    which = getattr(which, "value", which)
    if which == "MuDiff":
        params = true_parameters(cfg, quad_order)
        ends = simulate_endpoints(cfg, workers)
        v = v_mn_rho(cfg.n, cfg.m, params.sigma1, params.sigma2, params.rho)
        center = ends.logZ1 / cfg.n - ends.logZ2 / cfg.m
        half = v * phi_quantile(1.0 - kappa / 2.0)
        truth = params.mu1 - params.mu2
        hits = (center - half <= truth) & (truth <= center + half)
    elif which == "SigmaSq":
        if cfg.family1 != cfg.family2 or cfg.latent_r != 0 or cfg.n != cfg.m:
            raise DomainError("SigmaSq coverage needs identical families, latent_r = 0 and n = m")
        truth = env_moments(cfg.family1, quad_order).sigma ** 2
        ends = simulate_endpoints(cfg, workers)
        d2 = (ends.logZ1 - ends.logZ2) ** 2
        lo = d2 / (2.0 * cfg.n * chi2_quantile_1df(1.0 - kappa / 2.0))
        hi = d2 / (2.0 * cfg.n * chi2_quantile_1df(kappa / 2.0))
        hits = (lo <= truth) & (truth <= hi)
    else:
        raise DomainError(f"unknown interval kind {which!r}; expected MuDiff or SigmaSq")
    return float(np.mean(hits))


def rejection_rate(cfg, level, workers=None, quad_order=64):
    """Fraction of replications in which ``mu1 = mu2`` is rejected at ``level``."""
    params = true_parameters(cfg, quad_order)
    ends = simulate_endpoints(cfg, workers)
    v = v_mn_rho(cfg.n, cfg.m, params.sigma1, params.sigma2, params.rho)
    stat = (ends.logZ1 / cfg.n - ends.logZ2 / cfg.m) / v
    p = 2.0 * phi_cdf_array(-np.abs(stat))
    return float(np.mean(p < level))


# --------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class Check:
    diagnostic: str
    x: float
    value: float
    lo: float
    hi: float

    @property
    def passed(self):
        return bool(self.lo <= self.value <= self.hi)

    def row(self):
        x = "" if self.x is None else repr(float(self.x))
        return (self.diagnostic, x, repr(float(self.value)), repr(float(self.lo)),
                repr(float(self.hi)), int(self.passed))


CSV_COLUMNS = ("diagnostic", "x", "value", "envelope_lo", "envelope_hi", "pass")


@dataclass
class VerificationReport:
    suite: str
    size: int
    n: int
    m: int
    delta_prime: float = DEFAULT_DELTA_PRIME
    ks: float = None
    w1: float = None
    nonuniform_profile: list = field(default_factory=list)
    tail_ratios: list = field(default_factory=list)
    coverage: float = None
    extra: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def rows(self):
        return [c.row() for c in self.checks]

    def summary(self):
        prof = max((g for _, g in self.nonuniform_profile), default=None)
        return {
            "suite": self.suite,
            "passed": self.passed,
            "N": self.size,
            "n": self.n,
            "m": self.m,
            "delta_prime": self.delta_prime,
            "ks": self.ks,
            "w1": self.w1,
            "max_profile": prof,
            "coverage": self.coverage,
            **self.extra,
            "failures": [
                {"diagnostic": c.diagnostic, "x": c.x, "value": c.value,
                 "envelope": [c.lo, c.hi]} for c in self.failures
            ],
        }


def ks_envelope(size):
    return max(0.01, 1.95 / math.sqrt(size))


def w1_envelope(size):
    return max(0.02, 3.0 / math.sqrt(size))


def profile_envelope(size):
    return max(0.05, 4.0 / math.sqrt(size))


def tail_envelope(se):
    return min(0.8, 1.0 - 3.5 * se), max(1.25, 1.0 + 3.5 * se)


def rate_envelope(target, size):
    se = math.sqrt(target * (1.0 - target) / size)
    half = max(0.01, 3.5 * se)
    return target - half, target + half


def _ladder_checks(name, values, sizes, ns, sd_unit):
    out = [Check(name, float(ns[0]), values[0], 0.0, math.inf)]
    for k in range(1, len(values)):
        slack = 3.0 * sd_unit * math.sqrt(1.0 / sizes[k - 1] + 1.0 / sizes[k])
        out.append(Check(name, float(ns[k]), values[k], 0.0, values[k - 1] + slack))
    return out


def run_suite(suite, cfg, kappa=0.05, delta_prime=DEFAULT_DELTA_PRIME,
              x_grid=DEFAULT_TAIL_GRID, ladder=DEFAULT_LADDER, ladder_replications=200000,
              coverage_replications=10000, source="simulate", workers=None,
              quad_order=64, sample=None):
    """Run one named suite and collect every check into a report.

    ``source="normal"`` replaces the simulated R sample (and the ladder
    samples) by true standard normal draws, which every envelope must
    accept.  Coverage checks always simulate.  ``sample`` may pass a
    precomputed :class:`SampleSet` for ``cfg``.
    """
    if suite not in SUITES:
        raise DomainError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
    if source not in ("simulate", "normal"):
        raise DomainError(f"unknown sample source {source!r}; expected simulate or normal")
    delta_prime = _check_delta_prime(delta_prime)
    want = {suite} if suite != "all" else set(SUITES)

    def draw(c):
        if source == "normal":
            return SampleSet.normal(c.replications, c.master_seed)
        return SampleSet.from_config(c, workers, quad_order=quad_order)

    report = VerificationReport(suite, int(cfg.replications), int(cfg.n), int(cfg.m), delta_prime)
    needs_sample = want & {"clt", "berry-esseen", "tails"}
    s = sample if sample is not None or not needs_sample else draw(cfg)
    N = len(s) if s is not None else 0
    if s is not None:
        report.size = N
    checks = report.checks

    if want & {"clt", "berry-esseen"}:
        report.ks = ks_distance(s)
        checks.append(Check("ks", None, report.ks, 0.0, ks_envelope(N)))
    if "clt" in want:
        report.w1 = wasserstein1(s)
        checks.append(Check("w1", None, report.w1, 0.0, w1_envelope(N)))
    if "berry-esseen" in want:
        report.nonuniform_profile = nonuniform_profile(s, delta_prime)
        hi = profile_envelope(N)
        checks.extend(Check("profile", x, g, 0.0, hi) for x, g in report.nonuniform_profile)
        ks_l, w1_l, sizes = [], [], []
        for level in ladder:
            sub = draw(replace(cfg, n=int(level), m=int(level),
                               replications=int(ladder_replications)))
            ks_l.append(ks_distance(sub))
            w1_l.append(wasserstein1(sub))
            sizes.append(len(sub))
        report.extra["ladder"] = {"n": list(ladder), "ks": ks_l, "w1": w1_l}
        checks.extend(_ladder_checks("ladder_ks", ks_l, sizes, ladder, 0.5))
        checks.extend(_ladder_checks("ladder_w1", w1_l, sizes, ladder, 1.0))
    if "tails" in want:
        report.tail_ratios = tail_ratio_curve(s, x_grid)
        for t in report.tail_ratios:
            lo, hi = tail_envelope(t.se)
            checks.append(Check("tail", t.x, t.ratio, lo, hi))
            checks.append(Check("tail_mirrored", t.x, t.mirrored, lo, hi))
    if "coverage" in want:
        ccfg = replace(cfg, replications=int(coverage_replications))
        report.coverage = coverage_study(ccfg, kappa, "MuDiff", workers, quad_order)
        lo, hi = rate_envelope(1.0 - kappa, ccfg.replications)
        checks.append(Check("coverage_mu_diff", None, report.coverage, lo, hi))
        h0 = replace(ccfg, family2=cfg.family1)
        size = rejection_rate(h0, kappa, workers, quad_order)
        lo, hi = rate_envelope(kappa, h0.replications)
        checks.append(Check("test_size", None, size, lo, hi))
        copies = replace(ccfg, family2=cfg.family1, latent_r=0.0, m=cfg.n)
        cov_sq = coverage_study(copies, kappa, "SigmaSq", workers, quad_order)
        lo, hi = rate_envelope(1.0 - kappa, copies.replications)
        checks.append(Check("coverage_sigma_sq", None, cov_sq, lo, hi))
        report.extra.update({"kappa": kappa, "test_size": size, "coverage_sigma_sq": cov_sq,
                             "coverage_replications": int(coverage_replications)})
    return report
