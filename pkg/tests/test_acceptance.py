"""Acceptance criteria 1-12, one recorded PASS/FAIL line each.

The heavy criteria share one n = m = 2000, N = 10^6 sample of R and one
ladder of 2 * 10^5 samples at n = m = 250, 1000, 4000.  Run with ``-s`` (or
read the terminal summary) to see the criterion lines.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from bpre_compare import (EnvironmentFamily, SampleSet, SimConfig, decompose, env_moments,
                          ks_distance, nonuniform_profile, pair_correlation, phi_cdf,
                          r_statistic, simulate_endpoints, simulate_pair,
                          tail_ratio_curve, wasserstein1)
from bpre_compare.cli import main
from bpre_compare.special import chi2_quantile_1df, phi_cdf_array, phi_quantile_array
from bpre_compare.verify import DEFAULT_LADDER, coverage_study, rejection_rate, tail_envelope

pytestmark = pytest.mark.slow

TP = EnvironmentFamily.two_point
BIG = SimConfig(TP(0, 1), TP(0, 1), latent_r=0.5, n=2000, m=2000, replications=10**6,
                master_seed=20240)
LADDER_N = 2 * 10**5


@pytest.fixture(scope="module")
def big_sample():
    t0 = time.perf_counter()
    s = SampleSet.from_config(BIG)
    return s, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ladder():
    out = []
    for level in DEFAULT_LADDER:
        cfg = SimConfig(TP(0, 1), TP(0, 1), latent_r=0.5, n=level, m=level,
                        replications=LADDER_N, master_seed=7000 + level)
        s = SampleSet.from_config(cfg)
        out.append((level, ks_distance(s), wasserstein1(s)))
    return out


def trend_ok(values, sd_unit):
    # later rungs may exceed earlier ones only by 3 standard errors of the difference
    slack = 3 * sd_unit * math.sqrt(2.0 / LADDER_N)
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def test_c01_special_functions(record_criterion):
    t0 = time.perf_counter()
    lower = np.logspace(-10, math.log10(0.5), 2001)
    p = np.concatenate([lower, 1.0 - lower])
    err = np.max(np.abs(phi_cdf_array(phi_quantile_array(p)) - p))
    lo, hi = 0.0, 10.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 2 * phi_cdf(mid) - 1 < 0.95 else (lo, mid)
    oracle = lo * lo
    q = chi2_quantile_1df(0.95)
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and abs(q - 3.8415) <= 1e-3 and abs(q - oracle) <= 1e-9 and dt < 1.0
    record_criterion(1, "special functions", ok,
                     f"max round-trip error {err:.2e}, chi2(0.95)={q:.6f} "
                     f"(bisection {oracle:.6f}), {dt:.2f}s")
    assert ok


def test_c02_martingale_normalisation(record_criterion):
    t0 = time.perf_counter()
    cfg = SimConfig(TP(0, 1), TP(0, 1), n=100, m=1, replications=10**5, master_seed=2)
    w = np.exp(simulate_endpoints(cfg).logW1)
    se = w.std(ddof=1) / math.sqrt(w.size)
    dt = time.perf_counter() - t0
    ok = abs(w.mean() - 1.0) <= 3 * se and dt < 60
    record_criterion(2, "martingale normalisation", ok,
                     f"mean W={w.mean():.5f}, 3 SE={3 * se:.5f}, {dt:.1f}s")
    assert ok


def test_c03_decomposition_identity(record_criterion):
    t0 = time.perf_counter()
    f1, f2 = TP(0, 1), EnvironmentFamily.shifted_poisson(-0.2, 0.7)
    cfg = SimConfig(f1, f2, latent_r=0.5, n=120, m=80, master_seed=3)
    p1, p2 = env_moments(f1), env_moments(f2)
    par = (p1.mu, p2.mu, p1.sigma, p2.sigma, pair_correlation(f1, f2, 0.5).rho)
    worst = 0.0
    for rep in range(10**4):
        pair = simulate_pair(cfg, rep)
        r = r_statistic(pair.traj1.logZ, 120, pair.traj2.logZ, 80, *par).r
        d = decompose(pair, *par)
        worst = max(worst, abs(d.reconstructed - r) / max(1.0, abs(r)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 60
    record_criterion(3, "decomposition identity", ok,
                     f"max relative error {worst:.2e} over 10^4 pairs, {dt:.1f}s")
    assert ok


def test_c04_clt(big_sample, record_criterion):
    s, dt = big_sample
    ks = ks_distance(s)
    ok = ks <= 0.01
    record_criterion(4, "CLT at n=m=2000", ok,
                     f"KS={ks:.5f} (N={len(s)}, limit 0.01), "
                     f"simulated in {dt:.0f}s on 1 core")
    assert ok


def test_c05_berry_esseen_trend(ladder, record_criterion):
    ks = [k for _, k, _ in ladder]
    ok = trend_ok(ks, 0.5)
    record_criterion(5, "Berry-Esseen trend", ok,
                     "KS along n=250/1000/4000: " + ", ".join(f"{k:.5f}" for k in ks))
    assert ok


def test_c06_nonuniform_profile(big_sample, record_criterion):
    s, _ = big_sample
    prof = nonuniform_profile(s, 0.5)
    x, gap = max(prof, key=lambda t: t[1])
    ok = gap <= 0.05 and min(t[0] for t in prof) == -5 and max(t[0] for t in prof) == 5
    record_criterion(6, "non-uniform profile", ok, f"max weighted gap {gap:.5f} at x={x}")
    assert ok


def test_c07_tail_equivalence(big_sample, record_criterion):
    s, _ = big_sample
    curve = tail_ratio_curve(s, tuple(k / 10 for k in range(21)))
    ratios = [t.ratio for t in curve] + [t.mirrored for t in curve]
    ok = len(curve) == 21 and all(0.8 <= r <= 1.25 for r in ratios)
    # also inside the sampling-error envelope used by the verify suite
    strict = all(tail_envelope(t.se)[0] <= min(t.ratio, t.mirrored)
                 and max(t.ratio, t.mirrored) <= tail_envelope(t.se)[1] for t in curve)
    record_criterion(7, "tail equivalence on [0, 2]", ok,
                     f"ratios in [{min(ratios):.4f}, {max(ratios):.4f}], "
                     f"within sampling envelope: {strict}")
    assert ok


def test_c08_wasserstein(big_sample, ladder, record_criterion):
    s, _ = big_sample
    w1 = wasserstein1(s)
    w1s = [w for _, _, w in ladder]
    ok = w1 <= 0.02 and trend_ok(w1s, 1.0)
    record_criterion(8, "Wasserstein-1", ok,
                     f"W1={w1:.5f} at n=2000; ladder " + ", ".join(f"{w:.5f}" for w in w1s))
    assert ok


def test_c09_ci_coverage_and_size(record_criterion):
    cfg = SimConfig(TP(0, 1), TP(0.5, 1), latent_r=0.5, n=1000, m=1000,
                    replications=10**4, master_seed=9)
    cov = coverage_study(cfg, 0.05, "MuDiff")
    h0 = SimConfig(TP(0, 1), TP(0, 1), latent_r=0.0, n=1000, m=1000,
                   replications=10**4, master_seed=99)
    size = rejection_rate(h0, 0.05)
    ok = 0.94 <= cov <= 0.96 and 0.04 <= size <= 0.06
    record_criterion(9, "mu1-mu2 interval coverage and test size", ok,
                     f"coverage={cov:.4f}, size={size:.4f}")
    assert ok


def test_c10_sigma_sq_coverage(record_criterion):
    cfg = SimConfig(TP(0, 1), TP(0, 1), latent_r=0.0, n=1000, m=1000,
                    replications=10**4, master_seed=10)
    cov = coverage_study(cfg, 0.05, "SigmaSq")
    ok = 0.94 <= cov <= 0.96
    record_criterion(10, "sigma^2 interval coverage", ok, f"coverage={cov:.4f}")
    assert ok


def test_c11_continuation_fidelity(record_criterion):
    base = dict(family1=TP(0, 1), family2=TP(0, 1), m=1, replications=10**5)
    p = {}
    for n, cap in ((20, 10**9), (25, 10**4)):
        exact = simulate_endpoints(SimConfig(n=n, pop_cap=None, master_seed=11, **base)).logZ1
        capped = simulate_endpoints(SimConfig(n=n, pop_cap=cap, master_seed=12, **base)).logZ1
        p[(n, cap)] = stats.ks_2samp(exact, capped).pvalue
    ok = all(v > 1e-3 for v in p.values())
    record_criterion(11, "continuation vs exact mode", ok,
                     f"KS p={p[(20, 10**9)]:.3f} (n=20, cap 1e9); "
                     f"p={p[(25, 10**4)]:.3f} (n=25, cap 1e4, continuation active)")
    assert ok


def test_c12_reproducibility(tmp_path, record_criterion):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[bpre]\nfamily2_a = 0.3\nlatent_r = 0.5\nn = 300\nm = 250\n"
                   "replications = 4000\nmaster_seed = 12\n")
    outs = []
    for tag, workers in (("a", 1), ("b", 1), ("c", 8)):
        path = tmp_path / f"{tag}.csv"
        assert main(["simulate", str(cfg), "-o", str(path), "--workers", str(workers)]) == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    record_criterion(12, "reproducibility", ok,
                     f"{len(outs[0])} bytes identical across 2 runs and workers 1 vs 8")
    assert ok
