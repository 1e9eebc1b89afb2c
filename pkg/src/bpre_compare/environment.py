"""Parametric environment families and their criticality parameters.

A family turns one latent standard normal ``g`` into an offspring law through
the linear predictor ``x = a + b*g``.  The link maps are a modelling choice:

``TwoPoint``
    offspring in {1, 2}, ``P(X = 2) = theta = sigmoid(x)``; ``m = 1 + theta``.
``ShiftedPoisson``
    ``X = 1 + Poisson(lam)``, ``lam = exp(x)``; ``m = 1 + exp(x)``.
``ShiftedGeometric``
    ``X = 1 + (failures before the first success)``, success probability
    ``q = sigmoid(-x)``; ``m = 1/q = 1 + exp(x)``.

Every law puts no mass on 0, so ``m >= 1`` and ``M = ln m >= 0``, and the sum
of ``k`` iid offspring has a closed form (``k`` plus a binomial, Poisson or
negative binomial count) that :func:`sample_offspring_sum` draws exactly.

Moment conditions.  TwoPoint has ``0 <= M <= ln 2`` and offspring bounded by
2, so ``M`` has exponential moments of every order and
``E (Z_1/m_0)^p`` is finite for all p.  For the other two families
``M = softplus(x) <= |a| + b|g| + ln 2`` has Gaussian tails, hence
exponential moments, and ``E[(Z_1/m_0)^p | env]`` is a polynomial in
``exp(x)`` divided by ``m^p``, which stays bounded; the annealed moment
conditions therefore hold as well.
"""

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import roots_hermitenorm

from . import rng as _rng
from .exceptions import DegenerateEnvironment, DomainError, PrecisionError

DEFAULT_QUAD_ORDER = 64
MAX_QUAD_ORDER = 1024
QUAD_TOL = 1e-10


class FamilyKind(enum.Enum):
    TWO_POINT = "TwoPoint"
    SHIFTED_POISSON = "ShiftedPoisson"
    SHIFTED_GEOMETRIC = "ShiftedGeometric"

    @property
    def code(self):
        return _KIND_CODES[self]


_KIND_CODES = {
    FamilyKind.TWO_POINT: 0,
    FamilyKind.SHIFTED_POISSON: 1,
    FamilyKind.SHIFTED_GEOMETRIC: 2,
}


@dataclass(frozen=True)
class EnvironmentFamily:
    """Law of one generation's environment.

    ``b = 0`` gives a constant environment; it is rejected unless
    ``allow_degenerate`` is set, which exists only for deterministic test
    fixtures (for those, ``a`` may be +-inf to pin theta at 0 or 1).
    """

    kind: FamilyKind
    a: float = 0.0
    b: float = 1.0
    allow_degenerate: bool = False

    def __post_init__(self):
        kind = self.kind
        if not isinstance(kind, FamilyKind):
            try:
                kind = FamilyKind(kind)
            except ValueError:
                names = ", ".join(k.value for k in FamilyKind)
                raise DomainError(f"unknown family kind {self.kind!r}; expected one of {names}")
            object.__setattr__(self, "kind", kind)
        a, b = float(self.a), float(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not math.isfinite(b) or b < 0:
            raise DomainError(f"latent scale b must be finite and >= 0, got {b!r}")
        if math.isnan(a) or (math.isinf(a) and not self.allow_degenerate):
            raise DomainError(f"latent location a must be finite, got {a!r}")
        if b == 0 and not self.allow_degenerate:
            raise DegenerateEnvironment(
                f"{kind.value}(a={a}, b=0) has a constant environment (sigma = 0)"
            )

    @classmethod
    def two_point(cls, a=0.0, b=1.0):
        return cls(FamilyKind.TWO_POINT, a, b)

    @classmethod
    def shifted_poisson(cls, a=0.0, b=1.0):
        return cls(FamilyKind.SHIFTED_POISSON, a, b)

    @classmethod
    def shifted_geometric(cls, a=0.0, b=1.0):
        return cls(FamilyKind.SHIFTED_GEOMETRIC, a, b)

    def to_dict(self):
        return {"kind": self.kind.value, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, d):
        return cls(FamilyKind(d["kind"]), float(d["a"]), float(d["b"]))

    def __str__(self):
        return f"{self.kind.value}(a={self.a!r}, b={self.b!r})"


@dataclass(frozen=True)
class EnvRealization:
    kind: FamilyKind
    link: float
    param: float
    mean: float
    log_mean: float


@dataclass(frozen=True)
class CriticalityParams:
    mu: float
    sigma: float
    quad_order: int
    quad_error_estimate: float


@dataclass(frozen=True)
class PairCorrelation:
    latent_r: float
    rho: float


# --------------------------------------------------------------------------
# numba kernels shared with the simulator

@numba.njit(cache=True)
def _softplus(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True)
def link_param(kind, x):
    if kind == 0:
        return _sigmoid(x)
    if kind == 1:
        return math.exp(x)
    return _sigmoid(-x)


@numba.njit(cache=True)
def log_mean_from_link(kind, x):
    if kind == 0:
        # 1 + theta lies in [1, 2], so log(1 + theta) loses nothing to log1p;
        # exp(-x) may overflow to inf, which correctly gives theta = 0
        return math.log(1.0 + 1.0 / (1.0 + math.exp(-x)))
    return _softplus(x)


@numba.njit(cache=True)
def offspring_sum(state, kind, param, k):
    """Sum of ``k`` iid offspring counts given the environment parameter."""
    if kind == 0:
        return k + _rng.binomial(state, k, param)
    if kind == 1:
        return k + _rng.poisson(state, k * param)
    if param >= 1.0:
        return k
    return k + _rng.negative_binomial(state, k, (1.0 - param) / param)


@numba.njit(cache=True)
def _offspring_sum_many(state, kind, param, k, out):
    for i in range(out.shape[0]):
        out[i] = offspring_sum(state, kind, param, k)


def _log_mean_vec(kind, x):
    if kind is FamilyKind.TWO_POINT:
        return np.log1p(1.0 / (1.0 + np.exp(-x)))
    return np.logaddexp(0.0, x)


# --------------------------------------------------------------------------
# public operations

def sample_environment(family, g):
    """Map a latent normal draw to the generation's offspring law."""
    g = float(g)
    if not math.isfinite(g):
        raise DomainError(f"latent draw must be finite, got {g!r}")
    x = family.a + family.b * g if family.b != 0 else family.a
    code = family.kind.code
    param = float(link_param(code, x))
    big_m = float(log_mean_from_link(code, x))
    if code == 0:
        mean = 1.0 + param
    elif code == 1:
        mean = 1.0 + param
    else:
        mean = 1.0 / param
    return EnvRealization(family.kind, g, param, mean, big_m)


def sample_offspring_sum(real, k, rng, size=None):
    """Draw ``sum_{i<=k} X_i`` for iid offspring ``X_i`` from ``real``'s law.

    ``rng`` is a :class:`~bpre_compare.rng.RandomStream`.  With ``size`` an
    array of independent sums is returned.
    """
    k = int(k)
    if k < 1:
        raise DomainError(f"offspring sum needs k >= 1 parents, got {k}")
    code = real.kind.code
    if size is None:
        return int(offspring_sum(rng.state, code, real.param, np.int64(k)))
    out = np.empty(int(size), dtype=np.int64)
    _offspring_sum_many(rng.state, code, real.param, np.int64(k), out)
    return out


def _gauss_rule(order):
    x, w = roots_hermitenorm(order)
    return x, w / math.sqrt(2.0 * math.pi)


def _moments_at(family, order):
    x, w = _gauss_rule(order)
    vals = _log_mean_vec(family.kind, family.a + family.b * x)
    mu = float(np.dot(w, vals))
    var = float(np.dot(w, (vals - mu) ** 2))
    return mu, math.sqrt(max(var, 0.0))


def env_moments(family, quad_order=DEFAULT_QUAD_ORDER):
    """Mean and standard deviation of ``M = ln m`` by Gauss-Hermite quadrature.

    The rule is doubled from ``quad_order`` until the change against the
    half-order rule drops below 1e-10 (``MAX_QUAD_ORDER`` at most).
    """
    quad_order = int(quad_order)
    if quad_order < 8:
        raise DomainError(f"quad_order must be >= 8, got {quad_order}")
    if family.b == 0:
        raise DegenerateEnvironment(f"{family} is degenerate: sigma = 0")
    order = quad_order
    prev = _moments_at(family, order // 2)
    while True:
        cur = _moments_at(family, order)
        err = max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1]))
        if err <= QUAD_TOL:
            return CriticalityParams(cur[0], cur[1], order, err)
        if order * 2 > MAX_QUAD_ORDER:
            raise PrecisionError(
                f"quadrature for {family} did not converge: error {err:.3g} at order {order}"
            )
        prev = cur
        order *= 2


def _correlation_at(f1, f2, latent_r, order, mu1, mu2):
    x, w = _gauss_rule(order)
    c = math.sqrt(max(0.0, 1.0 - latent_r * latent_r))
    g1 = x[:, None]
    g2 = latent_r * x[:, None] + c * x[None, :]
    d1 = _log_mean_vec(f1.kind, f1.a + f1.b * g1) - mu1
    d2 = _log_mean_vec(f2.kind, f2.a + f2.b * g2) - mu2
    return float(w @ (d1 * d2) @ w)


def pair_correlation(f1, f2, latent_r, quad_order=DEFAULT_QUAD_ORDER):
    """Correlation of ``M_1`` and ``M_2`` under a Gaussian copula on the latents."""
    latent_r = float(latent_r)
    if not (-1.0 <= latent_r <= 1.0):
        raise DomainError(f"latent_r must lie in [-1, 1], got {latent_r!r}")
    p1 = env_moments(f1, quad_order)
    p2 = env_moments(f2, quad_order)
    if latent_r == 0.0:
        return PairCorrelation(latent_r, 0.0)
    order = max(int(quad_order), 8)
    prev = _correlation_at(f1, f2, latent_r, order // 2, p1.mu, p2.mu)
    while True:
        cov = _correlation_at(f1, f2, latent_r, order, p1.mu, p2.mu)
        if abs(cov - prev) <= QUAD_TOL * p1.sigma * p2.sigma:
            break
        if order * 2 > MAX_QUAD_ORDER // 2:
            raise PrecisionError(
                f"correlation quadrature did not converge at order {order}"
            )
        prev = cov
        order *= 2
    rho = cov / (p1.sigma * p2.sigma)
    return PairCorrelation(latent_r, min(1.0, max(-1.0, rho)))
