"""scikit-learn style wrappers around the functional API.

Rows of ``X`` are observations ``(ln Z1, ln Z2)``; the known parameters are
constructor arguments, so ``get_params``/``set_params`` and cloning work as
for any estimator.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_indices, check_logz, check_probability
from .environment import EnvironmentFamily
from .exceptions import DomainError
from .simulation import DEFAULT_POP_CAP, SimConfig, _endpoint_block
from .special import chi2_quantile_1df, phi_cdf_array, phi_quantile
from .statistic import v_mn_rho
from .verify import true_parameters


class BPRESimulator(BaseEstimator, TransformerMixin):
    """Maps replication indices to simulated ``(ln Z1, ln Z2)`` rows.

    ``fit`` computes the quadrature truths (``mu1_``, ``sigma1_``, ...).
    """

    def __init__(self, family1=None, family2=None, latent_r=0.0, n=100, m=100,
                 pop_cap=DEFAULT_POP_CAP, master_seed=0, quad_order=64):
        self.family1 = family1
        self.family2 = family2
        self.latent_r = latent_r
        self.n = n
        self.m = m
        self.pop_cap = pop_cap
        self.master_seed = master_seed
        self.quad_order = quad_order

    def _config(self, replications=1):
        f1 = self.family1 or EnvironmentFamily.two_point()
        f2 = self.family2 or f1
        return SimConfig(f1, f2, self.latent_r, self.n, self.m, self.pop_cap,
                         self.master_seed, replications)

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        p = true_parameters(self.config_, self.quad_order)
        self.mu1_, self.mu2_ = p.mu1, p.mu2
        self.sigma1_, self.sigma2_, self.rho_ = p.sigma1, p.sigma2, p.rho
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        idx = check_indices(X)
        out = np.empty((idx.shape[0], 2))
        for row, r in enumerate(idx):
            e = _endpoint_block(self.config_, int(r), 1)
            out[row] = e.logZ1[0], e.logZ2[0]
        return out

    def sample(self, replications):
        """Rows for replications ``0 .. replications-1``."""
        return self.fit().transform(np.arange(check_count(replications, "replications")))


class RStatistic(BaseEstimator, TransformerMixin):
    """Standardised comparison statistic R for each row."""

    def __init__(self, n=100, m=100, mu1=0.0, mu2=0.0, sigma1=1.0, sigma2=1.0, rho=0.0):
        self.n = n
        self.m = m
        self.mu1 = mu1
        self.mu2 = mu2
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.rho = rho

    def fit(self, X=None, y=None):
        self.v_ = v_mn_rho(check_count(self.n, "n"), check_count(self.m, "m"),
                           self.sigma1, self.sigma2, self.rho)
        return self

    def transform(self, X):
        check_is_fitted(self, "v_")
        X = check_logz(X)
        r = (X[:, 0] / self.n - X[:, 1] / self.m - (self.mu1 - self.mu2)) / self.v_
        return r[:, None]


class MuDiffTest(BaseEstimator):
    """Two-sided test of ``mu1 = mu2``; ``predict`` returns the reject decision."""

    def __init__(self, n=100, m=100, sigma1=1.0, sigma2=1.0, rho=0.0, level=0.05):
        self.n = n
        self.m = m
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.rho = rho
        self.level = level

    def fit(self, X=None, y=None):
        check_probability(self.level, "level")
        self.v_ = v_mn_rho(check_count(self.n, "n"), check_count(self.m, "m"),
                           self.sigma1, self.sigma2, self.rho)
        return self

    def statistic(self, X):
        check_is_fitted(self, "v_")
        X = check_logz(X)
        return (X[:, 0] / self.n - X[:, 1] / self.m) / self.v_

    def p_values(self, X):
        return 2.0 * phi_cdf_array(-np.abs(self.statistic(X)))

    def predict(self, X):
        return self.p_values(X) < self.level

    def confidence_interval(self, X):
        """``(N, 2)`` interval bounds for ``mu1 - mu2`` at level ``1 - level``."""
        check_is_fitted(self, "v_")
        X = check_logz(X)
        center = X[:, 0] / self.n - X[:, 1] / self.m
        half = self.v_ * phi_quantile(1.0 - self.level / 2.0)
        return np.column_stack([center - half, center + half])


class SigmaSqInterval(BaseEstimator, TransformerMixin):
    """Interval for sigma^2 from independent copies; rows map to ``(lo, hi)``."""

    def __init__(self, n=100, kappa=0.05, independent_copies=False):
        self.n = n
        self.kappa = kappa
        self.independent_copies = independent_copies

    def fit(self, X=None, y=None):
        if not self.independent_copies:
            raise DomainError("SigmaSqInterval needs independent_copies=True: the interval "
                              "is only valid for two independent copies of one process")
        check_count(self.n, "n")
        kappa = check_probability(self.kappa, "kappa")
        self.lo_quantile_ = chi2_quantile_1df(1.0 - kappa / 2.0)
        self.hi_quantile_ = chi2_quantile_1df(kappa / 2.0)
        return self

    def transform(self, X):
        check_is_fitted(self, "lo_quantile_")
        X = check_logz(X)
        d2 = (X[:, 0] - X[:, 1]) ** 2
        return np.column_stack([d2 / (2.0 * self.n * self.lo_quantile_),
                                d2 / (2.0 * self.n * self.hi_quantile_)])
