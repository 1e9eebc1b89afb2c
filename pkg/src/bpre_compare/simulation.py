"""Simulation of single and paired branching processes in random environments.

Populations are tracked exactly, as integers, while they stay at or below
``pop_cap``.  Once ``Z_k`` exceeds the cap the normalised martingale
``W_k = Z_k / Pi_k`` is frozen and the population continues as
``ln Z_j = ln W_k + ln Pi_j``.  Beyond ``10**9`` individuals the relative
one-step fluctuation of ``Z_{j+1} / (Z_j m_j)`` is below ``3e-5``, far under
the ``1/sqrt(n)`` resolution of the comparison statistic.  ``pop_cap=None``
disables the continuation (exact mode, limited to populations below 2**62).

Randomness for replication ``r`` comes from three streams keyed by
``(master_seed, r, stream)`` (see :mod:`bpre_compare.rng`): stream 0 drives
the latent environment pair, streams 1 and 2 the offspring of each process.
For the first ``min(n, m)`` generations the latents are
``g1 = e1, g2 = r*e1 + sqrt(1 - r^2)*e2``; the longer process then draws one
fresh latent per generation.
"""

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing

import numba
import numpy as np

from . import rng as _rng
from .environment import (
    EnvironmentFamily,
    link_param,
    log_mean_from_link,
    offspring_sum,
)
from .exceptions import DomainError, PrecisionError

DEFAULT_POP_CAP = 10**9
MIN_POP_CAP = 10**4
_INT_LIMIT = 2.0**62
WORKERS_ENV = "BPRE_WORKERS"


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# kernels

@numba.njit(cache=True)
def _neumaier(total, comp, x):
    t = total + x
    if abs(total) >= abs(x):
        comp += (total - t) + x
    else:
        comp += (x - t) + total
    return t, comp


@numba.njit(cache=True)
def _advance(kind, a, b, g, s, z, exact, logpi, comp, logw, pop_cap):
    """One generation of one process.  Returns the updated process state.

    status is 0 on success and -1 if exact mode would overflow int64.
    """
    x = a + b * g
    bigm = log_mean_from_link(kind, x)
    status = 0
    if exact:
        grow = z * math.exp(bigm)
        if pop_cap > 0 and (z > pop_cap or grow > _INT_LIMIT):
            exact = False
            logw = math.log(z) - (logpi + comp)
        elif grow > _INT_LIMIT:
            status = -1
        else:
            z = offspring_sum(s, kind, link_param(kind, x), z)
    logpi, comp = _neumaier(logpi, comp, bigm)
    return z, exact, logpi, comp, logw, bigm, status


@numba.njit(cache=True)
def _simulate_single_into(kind, a, b, n, pop_cap, s, big_m, logpi_path, logz_path):
    z = np.int64(1)
    exact = True
    logpi = 0.0
    comp = 0.0
    logw = 0.0
    exact_until = n
    logpi_path[0] = 0.0
    logz_path[0] = 0.0
    for k in range(n):
        g = _rng.normal(s)
        was_exact = exact
        z, exact, logpi, comp, logw, bm, status = _advance(
            kind, a, b, g, s, z, exact, logpi, comp, logw, pop_cap)
        if status != 0:
            return -1, z, status
        if was_exact and not exact:
            exact_until = k
        big_m[k] = bm
        logpi_path[k + 1] = logpi + comp
        if exact:
            logz_path[k + 1] = math.log(z)
        else:
            logz_path[k + 1] = logw + (logpi + comp)
    return exact_until, z, 0


@numba.njit(cache=True)
def _simulate_pair_into(kind1, a1, b1, kind2, a2, b2, latent_r, n, m, pop_cap,
                        master_seed, rep, s_env, s1, s2,
                        m1, lp1, lz1, m2, lp2, lz2, latents, record):
    _rng.seed_state(s_env, _rng.stream_key(master_seed, rep, 0))
    _rng.seed_state(s1, _rng.stream_key(master_seed, rep, 1))
    _rng.seed_state(s2, _rng.stream_key(master_seed, rep, 2))
    c = math.sqrt(max(0.0, 1.0 - latent_r * latent_r))
    shared = min(n, m)
    longest = max(n, m)
    _rng.fill_normal(s_env, latents, shared + longest)
    j = 0

    z1 = np.int64(1)
    ex1 = True
    p1 = 0.0
    c1 = 0.0
    w1 = 0.0
    until1 = n
    z2 = np.int64(1)
    ex2 = True
    p2 = 0.0
    c2 = 0.0
    w2 = 0.0
    until2 = m
    lp1[0] = 0.0
    lz1[0] = 0.0
    lp2[0] = 0.0
    lz2[0] = 0.0
    status = 0
    k = 0
    # phase 1: at least one process still carries an exact population
    while k < longest and ((ex1 and k < n) or (ex2 and k < m)):
        if k < shared:
            g1 = latents[j]
            g2 = latent_r * latents[j] + c * latents[j + 1]
            j += 2
        elif k < n:
            g1 = latents[j]
            g2 = 0.0
            j += 1
        else:
            g1 = 0.0
            g2 = latents[j]
            j += 1
        if k < n:
            was = ex1
            z1, ex1, p1, c1, w1, bm, st = _advance(
                kind1, a1, b1, g1, s1, z1, ex1, p1, c1, w1, pop_cap)
            if st != 0:
                status = st
            if was and not ex1:
                until1 = k
            if record:
                m1[k] = bm
                lp1[k + 1] = p1 + c1
                lz1[k + 1] = math.log(z1) if ex1 else w1 + (p1 + c1)
        if k < m:
            was = ex2
            z2, ex2, p2, c2, w2, bm, st = _advance(
                kind2, a2, b2, g2, s2, z2, ex2, p2, c2, w2, pop_cap)
            if st != 0:
                status = st
            if was and not ex2:
                until2 = k
            if record:
                m2[k] = bm
                lp2[k + 1] = p2 + c2
                lz2[k + 1] = math.log(z2) if ex2 else w2 + (p2 + c2)
        k += 1
    # phase 2: both populations continue deterministically; only M is needed
    for kk in range(k, shared):
        g1 = latents[2 * kk]
        g2 = latent_r * g1 + c * latents[2 * kk + 1]
        bm1 = log_mean_from_link(kind1, a1 + b1 * g1)
        bm2 = log_mean_from_link(kind2, a2 + b2 * g2)
        p1, c1 = _neumaier(p1, c1, bm1)
        p2, c2 = _neumaier(p2, c2, bm2)
        if record:
            m1[kk] = bm1
            lp1[kk + 1] = p1 + c1
            lz1[kk + 1] = w1 + (p1 + c1)
            m2[kk] = bm2
            lp2[kk + 1] = p2 + c2
            lz2[kk + 1] = w2 + (p2 + c2)
    for kk in range(max(k, shared), n):
        bm1 = log_mean_from_link(kind1, a1 + b1 * latents[shared + kk])
        p1, c1 = _neumaier(p1, c1, bm1)
        if record:
            m1[kk] = bm1
            lp1[kk + 1] = p1 + c1
            lz1[kk + 1] = w1 + (p1 + c1)
    for kk in range(max(k, shared), m):
        bm2 = log_mean_from_link(kind2, a2 + b2 * latents[shared + kk])
        p2, c2 = _neumaier(p2, c2, bm2)
        if record:
            m2[kk] = bm2
            lp2[kk + 1] = p2 + c2
            lz2[kk + 1] = w2 + (p2 + c2)
    lp1[n] = p1 + c1
    lz1[n] = math.log(z1) if ex1 else w1 + (p1 + c1)
    lp2[m] = p2 + c2
    lz2[m] = math.log(z2) if ex2 else w2 + (p2 + c2)
    return until1, z1, until2, z2, status


@numba.njit(cache=True)
def _simulate_block(kind1, a1, b1, kind2, a2, b2, latent_r, n, m, pop_cap,
                    master_seed, start, out_lz1, out_lp1, out_u1,
                    out_lz2, out_lp2, out_u2):
    s_env = np.empty(4, dtype=np.uint64)
    s1 = np.empty(4, dtype=np.uint64)
    s2 = np.empty(4, dtype=np.uint64)
    m1 = np.empty(n)
    lp1 = np.empty(n + 1)
    lz1 = np.empty(n + 1)
    m2 = np.empty(m)
    lp2 = np.empty(m + 1)
    lz2 = np.empty(m + 1)
    latents = np.empty(n + m)
    for i in range(out_lz1.shape[0]):
        u1, z1, u2, z2, st = _simulate_pair_into(
            kind1, a1, b1, kind2, a2, b2, latent_r, n, m, pop_cap,
            master_seed, np.uint64(start + i), s_env, s1, s2,
            m1, lp1, lz1, m2, lp2, lz2, latents, False)
        if st != 0:
            return st
        out_lz1[i] = lz1[n]
        out_lp1[i] = lp1[n]
        out_u1[i] = u1
        out_lz2[i] = lz2[m]
        out_lp2[i] = lp2[m]
        out_u2[i] = u2
    return 0


# --------------------------------------------------------------------------
# data types

@dataclass(frozen=True, eq=False)
class Trajectory:
    """One realised path.  Arrays are indexed by generation.

    ``M_path[k]`` is the log mean of generation ``k``'s environment (so it
    has length ``n``); ``logZ_path`` and ``logPi_path`` run over ``0..n``.
    """

    n: int
    M_path: np.ndarray
    logZ_path: np.ndarray
    logPi_path: np.ndarray
    exact_until: int
    z_exact: int

    @property
    def m_path(self):
        return np.exp(self.M_path)

    @property
    def logM_sum(self):
        return float(self.logPi_path[-1])

    @property
    def logZ(self):
        return float(self.logZ_path[-1])

    @property
    def logPi(self):
        return float(self.logPi_path[-1])

    @property
    def logW(self):
        return self.logZ - self.logPi

    @property
    def logW_path(self):
        return self.logZ_path - self.logPi_path

    @property
    def exact_flags(self):
        return np.arange(self.n + 1) <= self.exact_until


@dataclass(frozen=True, eq=False)
class PairedTrajectory:
    traj1: Trajectory
    traj2: Trajectory
    latent_r: float
    seed: int
    replication: int


@dataclass(frozen=True)
class SimConfig:
    family1: EnvironmentFamily
    family2: EnvironmentFamily
    latent_r: float = 0.0
    n: int = 100
    m: int = 100
    pop_cap: int | None = DEFAULT_POP_CAP
    master_seed: int = 0
    replications: int = 1

    def __post_init__(self):
        if int(self.n) < 1 or int(self.m) < 1:
            raise DomainError(f"generation counts must be >= 1, got n={self.n}, m={self.m}")
        if not (-1.0 <= float(self.latent_r) <= 1.0):
            raise DomainError(f"latent_r must lie in [-1, 1], got {self.latent_r!r}")
        if self.pop_cap is not None and int(self.pop_cap) < MIN_POP_CAP:
            raise DomainError(f"pop_cap must be >= {MIN_POP_CAP} (or None), got {self.pop_cap}")
        if not (0 <= int(self.master_seed) < 2**64):
            raise DomainError("master_seed must be a 64-bit unsigned integer")
        if int(self.replications) < 1:
            raise DomainError(f"replications must be >= 1, got {self.replications}")

    def to_dict(self):
        return {
            "family1": self.family1.to_dict(),
            "family2": self.family2.to_dict(),
            "latent_r": float(self.latent_r),
            "n": int(self.n),
            "m": int(self.m),
            "pop_cap": None if self.pop_cap is None else int(self.pop_cap),
            "master_seed": int(self.master_seed),
            "replications": int(self.replications),
        }

    def digest(self):
        """sha256 of the canonical JSON form; identifies the sample it generates."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    @property
    def _pop_cap_code(self):
        return np.int64(0 if self.pop_cap is None else self.pop_cap)

    def _kernel_args(self):
        f1, f2 = self.family1, self.family2
        return (f1.kind.code, f1.a, f1.b, f2.kind.code, f2.a, f2.b,
                float(self.latent_r), int(self.n), int(self.m), self._pop_cap_code,
                np.uint64(int(self.master_seed)))


@dataclass
class Endpoints:
    """Final-generation values for a batch of paired replications."""

    logZ1: np.ndarray
    logPi1: np.ndarray
    exact_until1: np.ndarray
    logZ2: np.ndarray
    logPi2: np.ndarray
    exact_until2: np.ndarray
    start: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def logW1(self):
        return self.logZ1 - self.logPi1

    @property
    def logW2(self):
        return self.logZ2 - self.logPi2

    def __len__(self):
        return self.logZ1.shape[0]


# --------------------------------------------------------------------------
# operations

def _resolve_cap(pop_cap):
    if pop_cap is None:
        return np.int64(0)
    pop_cap = int(pop_cap)
    if pop_cap < MIN_POP_CAP:
        raise DomainError(f"pop_cap must be >= {MIN_POP_CAP} (or None), got {pop_cap}")
    return np.int64(pop_cap)


def simulate_trajectory(family, n, pop_cap=DEFAULT_POP_CAP, rng=None):
    """Simulate ``Z_0 = 1, ..., Z_n`` for one process.

    ``rng`` is a :class:`~bpre_compare.rng.RandomStream` (or an integer seed);
    both the environment latents and the offspring counts are drawn from it.
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = _rng.RandomStream(0 if rng is None else int(rng))
    big_m = np.empty(n)
    logpi = np.empty(n + 1)
    logz = np.empty(n + 1)
    until, z, status = _simulate_single_into(
        family.kind.code, family.a, family.b, n, _resolve_cap(pop_cap), rng.state,
        big_m, logpi, logz)
    if status != 0:
        raise PrecisionError("exact mode population exceeded the int64 range")
    return Trajectory(n, big_m, logz, logpi, int(until), int(z))


def simulate_pair(cfg, replication_index):
    """Paired trajectory for one replication; a pure function of the config."""
    r = int(replication_index)
    if r < 0:
        raise DomainError("replication_index must be >= 0")
    n, m = int(cfg.n), int(cfg.m)
    m1, lp1, lz1 = np.empty(n), np.empty(n + 1), np.empty(n + 1)
    m2, lp2, lz2 = np.empty(m), np.empty(m + 1), np.empty(m + 1)
    states = [np.empty(4, dtype=np.uint64) for _ in range(3)]
    args = cfg._kernel_args()
    u1, z1, u2, z2, status = _simulate_pair_into(
        *args, np.uint64(r), *states, m1, lp1, lz1, m2, lp2, lz2, np.empty(n + m), True)
    if status != 0:
        raise PrecisionError("exact mode population exceeded the int64 range")
    t1 = Trajectory(n, m1, lz1, lp1, int(u1), int(z1))
    t2 = Trajectory(m, m2, lz2, lp2, int(u2), int(z2))
    return PairedTrajectory(t1, t2, float(cfg.latent_r), int(cfg.master_seed), r)


def _endpoint_block(cfg, start, count):
    out = [np.empty(count) for _ in range(2)] + [np.empty(count, dtype=np.int64)]
    out2 = [np.empty(count) for _ in range(2)] + [np.empty(count, dtype=np.int64)]
    status = _simulate_block(*cfg._kernel_args(), np.int64(start), *out, *out2)
    if status != 0:
        raise PrecisionError("exact mode population exceeded the int64 range")
    return Endpoints(out[0], out[1], out[2], out2[0], out2[1], out2[2], start)


def _pair_block(cfg, start, count):
    return [simulate_pair(cfg, r) for r in range(start, start + count)]


def _blocks(total, block_size):
    return [(s, min(block_size, total - s)) for s in range(0, total, block_size)]


def _map_blocks(func, cfg, blocks, workers):
    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(blocks) <= 1:
        for start, count in blocks:
            yield func(cfg, start, count)
        return
    # warm the kernels so forked workers inherit compiled code
    func(cfg, 0, 1)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        futures = [pool.submit(func, cfg, s, c) for s, c in blocks]
        for fut in futures:
            yield fut.result()


def replicate(cfg, workers=None, block_size=256):
    """Yield ``cfg.replications`` paired trajectories in replication order.

    Each replication depends only on ``(cfg, index)``; ``workers`` changes
    wall time only.
    """
    blocks = _blocks(int(cfg.replications), int(block_size))
    for chunk in _map_blocks(_pair_block, cfg, blocks, workers):
        yield from chunk


def simulate_endpoints(cfg, workers=None, block_size=None):
    """Final ``ln Z`` and ``ln Pi`` of every replication, as arrays.

    The default block size gives each worker about four blocks (between 64
    and 20000 replications per block).  Results do not depend on it.
    """
    total = int(cfg.replications)
    if block_size is None:
        w = default_workers() if workers is None else max(1, int(workers))
        block_size = max(64, min(20000, -(-total // (4 * w))))
    blocks = _blocks(total, int(block_size))
    parts = list(_map_blocks(_endpoint_block, cfg, blocks, workers))
    return Endpoints(
        np.concatenate([p.logZ1 for p in parts]),
        np.concatenate([p.logPi1 for p in parts]),
        np.concatenate([p.exact_until1 for p in parts]),
        np.concatenate([p.logZ2 for p in parts]),
        np.concatenate([p.logPi2 for p in parts]),
        np.concatenate([p.exact_until2 for p in parts]),
    )


TRAJECTORY_COLUMNS = ("replication", "process", "generation", "M", "logZ", "logW", "exact_flag")


def trajectory_rows(pair):
    """CSV rows for one paired trajectory.

    One row per process and generation ``k = 1..n``: ``M`` is the log mean of
    the environment that produced generation ``k`` (``M_{k-1}``), ``logZ``
    and ``logW`` are the values at generation ``k``.
    """
    for proc, traj in ((1, pair.traj1), (2, pair.traj2)):
        flags = traj.exact_flags
        logw = traj.logW_path
        for k in range(1, traj.n + 1):
            yield (pair.replication, proc, k, repr(float(traj.M_path[k - 1])),
                   repr(float(traj.logZ_path[k])), repr(float(logw[k])), int(flags[k]))
