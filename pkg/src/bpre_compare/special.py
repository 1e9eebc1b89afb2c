"""Standard normal special functions.

``phi_cdf`` is evaluated through the complementary error function,
``Phi(x) = erfc(-x / sqrt(2)) / 2``, which keeps full relative accuracy in
the lower tail.  ``phi_quantile`` brackets the root by bisection and then
polishes it with safeguarded Newton steps.  The ``_nb_*`` kernels are the
numba-compiled scalar cores; the public wrappers validate their input and
raise :class:`~bpre_compare.exceptions.DomainError` instead of returning NaN.
"""

import math

import numba
import numpy as np

from .exceptions import DomainError

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)
SQRTPI = math.sqrt(math.pi)
LN2PI = math.log(2.0 * math.pi)

_QUANTILE_XTOL = 1e-13


@numba.njit(cache=True)
def _nb_phi_cdf(x):
    return 0.5 * math.erfc(-x / SQRT2)


@numba.njit(cache=True)
def _nb_phi_pdf(x):
    return math.exp(-0.5 * x * x) / SQRT2PI


@numba.njit(cache=True)
def _nb_lower_quantile(p):
    # root of Phi(x) = p for 0 < p <= 0.5
    lo = -40.0
    hi = 0.0
    while hi - lo > 0.25:
        mid = 0.5 * (lo + hi)
        if _nb_phi_cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    x = 0.5 * (lo + hi)
    for _ in range(100):
        f = _nb_phi_cdf(x) - p
        if f < 0.0:
            lo = x
        else:
            hi = x
        dens = _nb_phi_pdf(x)
        step = f / dens if dens > 0.0 else 0.0
        x_new = x - step
        if not (lo <= x_new <= hi):
            x_new = 0.5 * (lo + hi)
        done = abs(x_new - x) <= _QUANTILE_XTOL
        x = x_new
        if done:
            break
    return x


@numba.njit(cache=True)
def _nb_phi_quantile(p):
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return _nb_lower_quantile(p)
    return -_nb_lower_quantile(1.0 - p)


@numba.njit(cache=True)
def _nb_phi_cdf_array(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _nb_phi_cdf(x[i])
    return out


@numba.njit(cache=True)
def _nb_phi_quantile_array(p):
    out = np.empty(p.shape[0])
    for i in range(p.shape[0]):
        out[i] = _nb_phi_quantile(p[i])
    return out


def _check_finite(x, name="x"):
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return x


def _check_open_unit(p, name="p"):
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {p!r}")
    return p


def phi_cdf(x):
    """Standard normal distribution function."""
    return float(_nb_phi_cdf(_check_finite(x)))


def phi_pdf(x):
    return float(_nb_phi_pdf(_check_finite(x)))


def phi_quantile(p):
    """Inverse of :func:`phi_cdf` on the open unit interval.

    Accurate to about 1e-13 in ``x``; ``phi_quantile(1 - p)`` is computed as
    ``-phi_quantile(p)`` from the lower tail so the symmetry is exact up to
    the rounding of ``1 - p``.
    """
    return float(_nb_phi_quantile(_check_open_unit(p)))


def phi_cdf_array(x):
    """Vectorised :func:`phi_cdf` for a 1-D float array."""
    x = np.ascontiguousarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("phi_cdf_array requires finite input")
    return _nb_phi_cdf_array(x.ravel()).reshape(x.shape)


def phi_quantile_array(p):
    p = np.ascontiguousarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("phi_quantile_array requires 0 < p < 1")
    return _nb_phi_quantile_array(p.ravel()).reshape(p.shape)


def phi_quantile_asymptotic(p):
    """Small-``p`` expansion of the normal quantile with the o(1) term dropped.

    Returns ``-sqrt(L - ln L - ln(2 pi))`` with ``L = ln(1 / p**2)``.  Only
    defined for ``0 < p < exp(-1)``; the expansion is a small-``p`` statement
    and is not extrapolated.
    """
    p = float(p)
    if not (0.0 < p < math.exp(-1.0)):
        raise DomainError(f"asymptotic quantile needs 0 < p < 1/e, got {p!r}")
    big_l = -2.0 * math.log(p)
    radicand = big_l - math.log(big_l) - LN2PI
    if radicand <= 0.0:
        raise DomainError(
            f"radicand ln(1/p^2) - ln ln(1/p^2) - ln(2 pi) = {radicand:.6g} "
            f"is not positive at p={p!r}"
        )
    return -math.sqrt(radicand)


def chi2_quantile_1df(q):
    """q-quantile of the chi-squared law with one degree of freedom."""
    q = _check_open_unit(q, "q")
    z = _nb_phi_quantile(0.5 * (1.0 + q))
    return float(z * z)


def normal_tail_bounds(x):
    """Elementary bracket of the upper normal tail ``1 - Phi(x)`` for x >= 0.

    Returns ``(lower, upper)`` with
    ``lower = exp(-x^2/2) / (sqrt(2 pi) (1 + x))`` and
    ``upper = exp(-x^2/2) / (sqrt(pi) (1 + x))``.
    """
    x = _check_finite(x)
    if x < 0.0:
        raise DomainError(f"normal_tail_bounds needs x >= 0, got {x!r}")
    g = math.exp(-0.5 * x * x) / (1.0 + x)
    return g / SQRT2PI, g / SQRTPI
