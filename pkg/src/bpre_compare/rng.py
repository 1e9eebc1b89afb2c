"""Counter-seeded random streams and exact discrete samplers.

Every stream is a xoshiro256** generator whose 256-bit state is filled from
SplitMix64.  Stream keys are derived from ``(master_seed, replication,
stream)`` by the 64-bit finaliser of SplitMix64 (``mix64``)::

    rep_key    = mix64(master_seed ^ mix64(replication + GOLDEN))
    stream_key = mix64(rep_key + (stream + 1) * GOLDEN)

so a replication's draws depend only on those three integers, never on the
order in which replications are scheduled.

Normal variates use a 128-layer ziggurat (Doornik's ZIGNOR variant with the
Marsaglia exponential tail), one 64-bit word per accepted draw in the fast
path.  Gamma uses Marsaglia-Tsang; binomials use inversion for small means
and Hormann's BTRS rejection sampler otherwise; a Poisson with a large mean
is reduced through gamma-distributed arrival times to a small-mean inversion
or a binomial.
"""

import math

import numba
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U30 = np.uint64(30)
_U27 = np.uint64(27)
_U31 = np.uint64(31)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U45 = np.uint64(45)
_U7 = np.uint64(7)
_U5 = np.uint64(5)
_U9 = np.uint64(9)
_U1 = np.uint64(1)
_U64 = np.uint64(64)
_MASK7 = np.uint64(0x7F)
_TWO_M53 = 1.0 / 9007199254740992.0

# Poisson inversion is used below this mean; above it arrival times are peeled off
_SMALL_MEAN = 30.0
_BTRS_MIN_MEAN = 10.0


# --------------------------------------------------------------------------
# ziggurat tables (computed once at import, then frozen into the kernels)

def _ziggurat_tables(layers=128, r=3.442619855899, v=9.91256303526217e-3):
    x = np.empty(layers + 1)
    f = math.exp(-0.5 * r * r)
    x[0] = v / f
    x[1] = r
    x[layers] = 0.0
    for i in range(2, layers):
        x[i] = math.sqrt(-2.0 * math.log(v / x[i - 1] + f))
        f = math.exp(-0.5 * x[i] * x[i])
    ratio = x[1:] / x[:-1]
    return x, ratio, r


_ZIG_X, _ZIG_R, _ZIG_TAIL = _ziggurat_tables()


# --------------------------------------------------------------------------
# bit generators

@numba.njit(cache=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _U30)) * _MIX1
    z = (z ^ (z >> _U27)) * _MIX2
    return z ^ (z >> _U31)


@numba.njit(cache=True)
def stream_key(master_seed, replication, stream):
    rep = mix64(np.uint64(master_seed) ^ mix64(np.uint64(replication) + GOLDEN))
    return mix64(rep + (np.uint64(stream) + _U1) * GOLDEN)


@numba.njit(cache=True)
def seed_state(state, key):
    x = np.uint64(key)
    for i in range(4):
        x = x + GOLDEN
        state[i] = mix64(x)


@numba.njit(cache=True)
def _rotl(x, k):
    return (x << k) | (x >> (_U64 - k))


@numba.njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * _U5, _U7) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], _U45)
    return result


@numba.njit(cache=True)
def uniform(s):
    """Uniform double on the open interval (0, 1)."""
    return ((next_u64(s) >> _U11) + 0.5) * _TWO_M53


@numba.njit(cache=True)
def _normal_finish(s, bits):
    # ziggurat draw whose first 64-bit word is ``bits``
    zx = _ZIG_X
    zr = _ZIG_R
    while True:
        i = np.int64(bits & _MASK7)
        u = 2.0 * (((bits >> _U11) + 0.5) * _TWO_M53) - 1.0
        if abs(u) < zr[i]:
            return u * zx[i]
        if i == 0:
            # exponential tail beyond the base strip
            while True:
                xt = math.log(uniform(s)) / _ZIG_TAIL
                yt = math.log(uniform(s))
                if -2.0 * yt >= xt * xt:
                    break
            if u < 0.0:
                return xt - _ZIG_TAIL
            return _ZIG_TAIL - xt
        x = u * zx[i]
        f0 = math.exp(-0.5 * (zx[i] * zx[i] - x * x))
        f1 = math.exp(-0.5 * (zx[i + 1] * zx[i + 1] - x * x))
        if f1 + uniform(s) * (f0 - f1) < 1.0:
            return x
        bits = next_u64(s)


@numba.njit(cache=True)
def normal(s):
    return _normal_finish(s, next_u64(s))


@numba.njit(cache=True)
def fill_normal(state, out, count):
    """Write ``count`` normals into ``out``; same stream as repeated :func:`normal`.

    The generator state is held in registers for the fast ziggurat path.
    """
    zx = _ZIG_X
    zr = _ZIG_R
    s0 = state[0]
    s1 = state[1]
    s2 = state[2]
    s3 = state[3]
    for k in range(count):
        bits = _rotl(s1 * _U5, _U7) * _U9
        t = s1 << _U17
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, _U45)
        i = np.int64(bits & _MASK7)
        u = 2.0 * (((bits >> _U11) + 0.5) * _TWO_M53) - 1.0
        if abs(u) < zr[i]:
            out[k] = u * zx[i]
        else:
            state[0] = s0
            state[1] = s1
            state[2] = s2
            state[3] = s3
            out[k] = _normal_finish(state, bits)
            s0 = state[0]
            s1 = state[1]
            s2 = state[2]
            s3 = state[3]
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


@numba.njit(cache=True)
def gamma(s, shape):
    """Gamma(shape, 1) by Marsaglia-Tsang; boosted for shape < 1."""
    boost = 1.0
    if shape < 1.0:
        boost = uniform(s) ** (1.0 / shape)
        shape += 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = normal(s)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = uniform(s)
        x2 = x * x
        if u < 1.0 - 0.0331 * x2 * x2:
            return d * v * boost
        if math.log(u) < 0.5 * x2 + d * (1.0 - v + math.log(v)):
            return d * v * boost


@numba.njit(cache=True)
def beta(s, a, b):
    x = gamma(s, a)
    y = gamma(s, b)
    return x / (x + y)


@numba.njit(cache=True)
def _binomial_inversion(s, n, p):
    if n == 0 or p <= 0.0:
        return np.int64(0)
    flip = p > 0.5
    if flip:
        p = 1.0 - p
    q = 1.0 - p
    ratio = p / q
    u = uniform(s)
    f = q ** n
    k = np.int64(0)
    while u > f and k < n:
        u -= f
        k += 1
        f *= ratio * (n - k + 1) / k
    return n - k if flip else k


def _stirling_tail_table(size=10):
    # log(k!) - [(k + 1/2) log(k + 1) - (k + 1) + log(2 pi)/2]
    return np.array([
        math.lgamma(k + 1.0)
        - ((k + 0.5) * math.log(k + 1.0) - (k + 1.0) + 0.5 * math.log(2.0 * math.pi))
        for k in range(size)
    ])


_STIRLING_TAIL = _stirling_tail_table()


@numba.njit(cache=True)
def _stirling_tail(k):
    if k <= 9.0:
        return _STIRLING_TAIL[np.int64(k)]
    kp1sq = (k + 1.0) * (k + 1.0)
    return (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / 1260.0 / kp1sq) / kp1sq) / (k + 1.0)


@numba.njit(cache=True)
def _binomial_btrs(s, n, p):
    # Hormann's transformed rejection with squeeze; needs p <= 1/2, n*p >= 10
    count = float(n)
    spq = math.sqrt(count * p * (1.0 - p))
    b = 1.15 + 2.53 * spq
    a = -0.0873 + 0.0248 * b + 0.01 * p
    c = count * p + 0.5
    v_r = 0.92 - 4.2 / b
    r = p / (1.0 - p)
    alpha = (2.83 + 5.1 / b) * spq
    mode = math.floor((count + 1.0) * p)
    while True:
        u = uniform(s) - 0.5
        v = uniform(s)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + c)
        if us >= 0.07 and v <= v_r:
            return np.int64(k)
        if k < 0.0 or k > count:
            continue
        v = math.log(v * alpha / (a / (us * us) + b))
        bound = ((mode + 0.5) * math.log((mode + 1.0) / (r * (count - mode + 1.0)))
                 + (count + 1.0) * math.log1p((k - mode) / (count - k + 1.0))
                 + (k + 0.5) * math.log(r * (count - k + 1.0) / (k + 1.0))
                 + _stirling_tail(mode) + _stirling_tail(count - mode)
                 - _stirling_tail(k) - _stirling_tail(count - k))
        if v <= bound:
            return np.int64(k)


@numba.njit(cache=True)
def binomial(s, n, p):
    """Binomial(n, p) for any int64 ``n``.

    Sequential inversion when ``n*min(p, 1-p) < 10``, otherwise Hormann's
    BTRS rejection sampler, whose acceptance test uses Stirling's series with
    three correction terms (truncation error below 3e-11 in log-density).
    """
    n = np.int64(n)
    if n <= 0 or p <= 0.0:
        return np.int64(0)
    if p >= 1.0:
        return n
    flip = p > 0.5
    if flip:
        p = 1.0 - p
    if n * p < _BTRS_MIN_MEAN:
        k = _binomial_inversion(s, n, p)
    else:
        k = _binomial_btrs(s, n, p)
    return n - k if flip else k


@numba.njit(cache=True)
def _poisson_inversion(s, lam):
    u = uniform(s)
    f = math.exp(-lam)
    cdf = f
    k = np.int64(0)
    while u > cdf and f > 0.0:
        k += 1
        f *= lam / k
        cdf += f
    return k


@numba.njit(cache=True)
def poisson(s, lam):
    """Exact Poisson(lam); large means peel off gamma-distributed arrival times."""
    if lam <= 0.0:
        return np.int64(0)
    k = np.int64(0)
    while lam > _SMALL_MEAN:
        j = np.int64(lam * 0.875)
        x = gamma(s, float(j))
        if x < lam:
            k += j
            lam -= x
        else:
            return k + binomial(s, j - 1, lam / x)
    return k + _poisson_inversion(s, lam)


@numba.njit(cache=True)
def negative_binomial(s, k, scale):
    """Failures before ``k`` successes, as a gamma-mixed Poisson.

    ``scale`` is (1 - q) / q for success probability q, i.e. the mean number
    of failures contributed by one success.
    """
    if scale <= 0.0:
        return np.int64(0)
    return poisson(s, gamma(s, float(k)) * scale)


# --------------------------------------------------------------------------
# bulk helpers

@numba.njit(cache=True)
def _fill_normal(state, out):
    fill_normal(state, out, out.shape[0])


@numba.njit(cache=True)
def _fill_uniform(state, out):
    for i in range(out.shape[0]):
        out[i] = uniform(state)


@numba.njit(cache=True)
def _fill_binomial(state, n, p, out):
    for i in range(out.shape[0]):
        out[i] = binomial(state, n, p)


@numba.njit(cache=True)
def _fill_poisson(state, lam, out):
    for i in range(out.shape[0]):
        out[i] = poisson(state, lam)


@numba.njit(cache=True)
def _fill_gamma(state, shape, out):
    for i in range(out.shape[0]):
        out[i] = gamma(state, shape)


@numba.njit(cache=True)
def _fill_negative_binomial(state, k, scale, out):
    for i in range(out.shape[0]):
        out[i] = negative_binomial(state, k, scale)


class RandomStream:
    """A xoshiro256** stream owned by the caller.

    Construct with ``RandomStream(seed)`` or, for replication-keyed streams,
    ``RandomStream.for_replication(master_seed, replication, stream)``.
    """

    def __init__(self, seed=0, stream=0):
        self.key = int(stream_key(np.uint64(int(seed) % 2**64), np.uint64(0),
                                  np.uint64(stream)))
        self.state = np.empty(4, dtype=np.uint64)
        seed_state(self.state, np.uint64(self.key))

    @classmethod
    def for_replication(cls, master_seed, replication, stream):
        obj = cls.__new__(cls)
        obj.key = int(stream_key(np.uint64(int(master_seed) % 2**64),
                                 np.uint64(replication), np.uint64(stream)))
        obj.state = np.empty(4, dtype=np.uint64)
        seed_state(obj.state, np.uint64(obj.key))
        return obj

    def __repr__(self):
        return f"RandomStream(key={self.key:#018x})"

    def normal(self, size=None):
        if size is None:
            return float(normal(self.state))
        out = np.empty(int(size))
        _fill_normal(self.state, out)
        return out

    def uniform(self, size=None):
        if size is None:
            return float(uniform(self.state))
        out = np.empty(int(size))
        _fill_uniform(self.state, out)
        return out

    def gamma(self, shape, size=None):
        if size is None:
            return float(gamma(self.state, float(shape)))
        out = np.empty(int(size))
        _fill_gamma(self.state, float(shape), out)
        return out

    def binomial(self, n, p, size=None):
        if size is None:
            return int(binomial(self.state, np.int64(n), float(p)))
        out = np.empty(int(size), dtype=np.int64)
        _fill_binomial(self.state, np.int64(n), float(p), out)
        return out

    def poisson(self, lam, size=None):
        if size is None:
            return int(poisson(self.state, float(lam)))
        out = np.empty(int(size), dtype=np.int64)
        _fill_poisson(self.state, float(lam), out)
        return out

    def negative_binomial(self, k, q, size=None):
        """Failures before ``k`` successes with success probability ``q``."""
        scale = (1.0 - q) / q
        if size is None:
            return int(negative_binomial(self.state, np.int64(k), scale))
        out = np.empty(int(size), dtype=np.int64)
        _fill_negative_binomial(self.state, np.int64(k), scale, out)
        return out
