"""Pearson and partial correlations, partial-correlation matrices (PCMs)."""
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_count, check_matrix, check_seed

DEFAULT_RIDGE = 1e-8


class ConstantSeriesError(ValueError):
    """A series with zero variance was passed where a correlation is needed."""


class DegenerateConditioningError(ValueError):
    """The conditioning variable is perfectly correlated with X or Y."""


class RankDeficientError(ValueError):
    """The correlation matrix cannot be inverted even after regularization."""


@dataclass(frozen=True)
class Pcm:
    """Symmetric partial-correlation matrix with unit diagonal."""

    values: np.ndarray
    labels: tuple

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        labels = tuple(str(c) for c in self.labels)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"PCM must be square, got shape {v.shape}")
        if len(labels) != v.shape[0]:
            raise ValueError("PCM labels do not match its dimension")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12):
            raise ValueError("PCM must be symmetric")
        if not np.allclose(np.diag(v), 1.0, rtol=0, atol=1e-12):
            raise ValueError("PCM diagonal must be 1")
        if np.any(np.abs(v) > 1 + 1e-12):
            raise ValueError("PCM entries must lie in [-1, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return len(self.labels)


@dataclass(frozen=True)
class PcmDiffStats:
    sum: float
    mean: float
    std: float
    correlation: float


@dataclass(frozen=True)
class Summary:
    mean: float
    std: float
    median: float
    min: float
    max: float


def _as_series(x, name):
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return x


def pearson(x, y):
    """Pearson correlation ``cov(x, y) / (std(x) * std(y))``."""
    x = _as_series(x, "x")
    y = _as_series(y, "y")
    if len(x) != len(y):
        raise ValueError(f"series lengths differ: {len(x)} != {len(y)}")
    if len(x) < 2:
        raise ValueError("need at least two observations")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = np.dot(xc, xc)
    syy = np.dot(yc, yc)
    if sxx == 0 or syy == 0:
        raise ConstantSeriesError("correlation undefined for a constant series")
    r = np.dot(xc, yc) / np.sqrt(sxx * syy)
    return float(np.clip(r, -1.0, 1.0))


def partial_corr_first_order(x, y, z):
    """Correlation of ``x`` and ``y`` with the linear influence of ``z`` removed."""
    r_xy = pearson(x, y)
    r_xz = pearson(x, z)
    r_yz = pearson(y, z)
    if np.isclose(abs(r_xz), 1.0, rtol=0, atol=1e-12) or \
            np.isclose(abs(r_yz), 1.0, rtol=0, atol=1e-12):
        raise DegenerateConditioningError(
            "conditioning series is perfectly correlated with x or y"
        )
    return (r_xy - r_xz * r_yz) / (np.sqrt(1 - r_xz**2) * np.sqrt(1 - r_yz**2))


def pcm(data, ridge=DEFAULT_RIDGE, columns=None):
    """Full-order partial correlations of every column pair.

    Each entry is the correlation of two columns given all remaining ones,
    read off the inverse of the (ridge-regularised) correlation matrix.

    Raises
    ------
    ConstantSeriesError
        If a column is constant.
    RankDeficientError
        If the correlation matrix is singular to within the ridge, i.e. the
        regularisation alone keeps it invertible. The message names the
        columns involved in the null direction.
    """
    values, labels = check_matrix(data, columns, name="data")
    t, n = values.shape
    if t < n + 2:
        raise ValueError(f"need at least {n + 2} rows for {n} columns, got {t}")
    const = [labels[j] for j in np.flatnonzero(np.ptp(values, axis=0) == 0)]
    if const:
        raise ConstantSeriesError(f"constant columns: {const}")
    corr = np.corrcoef(values, rowvar=False)
    corr = (corr + corr.T) / 2
    eigval, eigvec = np.linalg.eigh(corr)
    null = eigval < 0.01 * ridge + 1e-12
    if np.any(null):
        involved = np.flatnonzero(np.any(np.abs(eigvec[:, null]) > 0.1, axis=1))
        raise RankDeficientError(
            "correlation matrix is rank deficient; linearly dependent columns: "
            f"{[labels[j] for j in involved]}"
        )
    prec = np.linalg.inv(corr + ridge * np.eye(n))
    d = np.sqrt(np.diag(prec))
    out = -prec / np.outer(d, d)
    out = (out + out.T) / 2
    np.fill_diagonal(out, 1.0)
    return Pcm(np.clip(out, -1.0, 1.0), labels)


def subset_rows(n_total, n_rows, seed):
    """Sorted row indices drawn uniformly without replacement."""
    n_rows = check_count(n_rows, name="n_rows")
    if n_rows > n_total:
        raise ValueError(f"n_rows={n_rows} exceeds the {n_total} available rows")
    rng = np.random.default_rng(check_seed(seed))
    return np.sort(rng.choice(n_total, size=n_rows, replace=False))


def pcm_reduced(data, n_rows, seed, ridge=DEFAULT_RIDGE):
    """PCM over a random row subset (the reduced PCM)."""
    values, labels = check_matrix(data, name="data")
    idx = subset_rows(len(values), n_rows, seed)
    return pcm(values[idx], ridge=ridge, columns=labels)


def pcm_diff(a, b):
    """Statistics of the elementwise difference ``a - b``.

    All N*N entries enter, so each off-diagonal pair is counted twice.
    ``std`` is the population standard deviation of the differences.
    """
    if a.values.shape != b.values.shape:
        raise ValueError(f"PCM shapes differ: {a.values.shape} vs {b.values.shape}")
    if a.labels != b.labels:
        raise ValueError("PCM labels differ")
    diff = a.values - b.values
    return PcmDiffStats(float(diff.sum()), float(diff.mean()), float(diff.std()),
                        pearson(a.values.ravel(), b.values.ravel()))


def summarize(column):
    x = _as_series(column, "column")
    if x.size == 0:
        raise ValueError("cannot summarize an empty series")
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return Summary(float(x.mean()), std, float(np.median(x)), float(x.min()), float(x.max()))


class PartialCorrelation(BaseEstimator):
    """Estimator wrapper around :func:`pcm`.

    Parameters
    ----------
    ridge : float
        Added to the correlation-matrix diagonal before inversion.
    n_rows : int or None
        If set, fit on a uniformly drawn row subset of this size.
    random_state : int or None
        Seed for the row subset.
    """

    def __init__(self, ridge=DEFAULT_RIDGE, n_rows=None, random_state=None):
        self.ridge = ridge
        self.n_rows = n_rows
        self.random_state = random_state

    def fit(self, X, y=None):
        values, labels = check_matrix(X)
        if self.n_rows is not None:
            values = values[subset_rows(len(values), self.n_rows, self.random_state)]
        self.pcm_ = pcm(values, ridge=self.ridge, columns=labels)
        self.feature_names_in_ = np.array(labels, dtype=object)
        self.n_features_in_ = len(labels)
        return self
