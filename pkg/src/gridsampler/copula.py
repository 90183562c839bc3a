"""Gaussian copula with empirical marginals."""
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_count, check_matrix, check_seed
from .sampling import SampleSet
from .stats import ConstantSeriesError

EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class GaussianCopulaModel:
    """Fitted copula.

    ``sorted_values[:, j]`` are the order statistics of column ``j``; order
    statistic ``k`` (1-based) sits at probability ``k / (T + 1)`` and the
    quantile function interpolates linearly between them.
    """

    sorted_values: np.ndarray
    corr: np.ndarray
    cholesky: np.ndarray
    columns: tuple

    @property
    def plotting_positions(self):
        t = len(self.sorted_values)
        return np.arange(1, t + 1) / (t + 1)

    def quantile(self, u):
        """Per-column empirical quantiles of a ``(m, N)`` array of probabilities."""
        pos = self.plotting_positions
        u = np.atleast_2d(u)
        return np.column_stack([np.interp(u[:, j], pos, self.sorted_values[:, j])
                                for j in range(u.shape[1])])


def nearest_correlation(corr, floor=EIGEN_FLOOR):
    """Clip eigenvalues at ``floor`` and rescale back to unit diagonal."""
    corr = (corr + corr.T) / 2
    w, v = np.linalg.eigh(corr)
    if w.min() >= floor:
        return corr
    fixed = (v * np.maximum(w, floor)) @ v.T
    d = np.sqrt(np.diag(fixed))
    fixed = fixed / np.outer(d, d)
    return (fixed + fixed.T) / 2


def normal_scores(values):
    """Phi^-1(rank / (T + 1)) per column, ties sharing their average rank."""
    t = len(values)
    return norm.ppf(rankdata(values, axis=0) / (t + 1))


def fit_copula(data, columns=None):
    values, labels = check_matrix(data, columns, name="data")
    t, n = values.shape
    if t < n + 2:
        raise ValueError(f"need at least {n + 2} rows for {n} columns, got {t}")
    const = [labels[j] for j in np.flatnonzero(np.ptp(values, axis=0) == 0)]
    if const:
        raise ConstantSeriesError(f"constant columns: {const}")
    z = normal_scores(values)
    corr = np.atleast_2d(np.corrcoef(z, rowvar=False))
    corr = nearest_correlation(corr)
    chol = np.linalg.cholesky(corr)
    return GaussianCopulaModel(np.sort(values, axis=0), corr, chol, tuple(labels))


def sample_copula(model, m, seed):
    m = check_count(m)
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, len(model.columns))) @ model.cholesky.T
    values = model.quantile(norm.cdf(z))
    return SampleSet(values, model.columns, "copula", seed)


class GaussianCopulaSampler(BaseEstimator):
    """Estimator front-end: ``fit`` on a time series, then ``sample``."""

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, X, y=None):
        values, labels = check_matrix(X)
        self.model_ = fit_copula(values, labels)
        self.feature_names_in_ = np.array(labels, dtype=object)
        self.n_features_in_ = len(labels)
        return self

    def sample(self, n_samples):
        check_is_fitted(self, "model_")
        return sample_copula(self.model_, n_samples, self.random_state)
