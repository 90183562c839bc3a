"""Sampling strategies for power-grid input vectors.

Base-load strategies (uniform, SRS around base, Thayer) need only the grid;
correlation sampling is fitted on a time series.
"""
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (check_count, check_matrix, check_seed, check_vector,
                          sample_streams)
from .grid import GridModel, base_vector, injection_columns
from .stats import DEFAULT_RIDGE, Pcm, pcm, subset_rows

STRATEGIES = ("uniform", "srs", "thayer", "copula", "correlation")


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    columns: tuple
    strategy: str
    seed: int
    rejected_count: int = 0
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        columns = tuple(str(c) for c in self.columns)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("a SampleSet needs a 2-D matrix with at least one row")
        if values.shape[1] != len(columns):
            raise ValueError("column labels do not match the sample matrix")
        if not np.all(np.isfinite(values)):
            raise ValueError("sample values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)

    def __len__(self):
        return len(self.values)

    def metadata(self):
        return {"strategy": self.strategy, "seed": self.seed, "config": self.config,
                "rejected_count": self.rejected_count}


@dataclass(frozen=True)
class SumInterval:
    s_min: float
    s_max: float

    def __post_init__(self):
        if not 0 <= self.s_min <= self.s_max:
            raise ValueError(f"invalid sum interval [{self.s_min}, {self.s_max}]")

    def contains(self, total):
        return self.s_min <= total <= self.s_max


@dataclass(frozen=True)
class CorrelationSamplingConfig:
    threshold: float = 0.85
    noise_std: float = 0.10
    interval_extension: float = 0.20
    max_attempts_per_sample: int = 1000
    dirichlet_alpha: float = 0.1

    def __post_init__(self):
        if not 0 < self.threshold <= 1:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold}")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        if self.interval_extension < 0:
            raise ValueError("interval_extension must be >= 0")
        check_count(self.max_attempts_per_sample, name="max_attempts_per_sample")
        if not self.dirichlet_alpha > 0:
            raise ValueError("dirichlet_alpha must be positive")


def _labels(columns, n, prefix="x"):
    if columns is None:
        return tuple(f"{prefix}{j}" for j in range(n))
    if len(columns) != n:
        raise ValueError(f"{len(columns)} column labels for {n} values")
    return tuple(columns)


def sample_uniform(p_base, m, seed, columns=None):
    """Independent draws on ``[0, p_base_j]`` per column."""
    p_base = check_vector(p_base, name="p_base", nonnegative=True)
    m = check_count(m)
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    values = rng.random((m, len(p_base))) * p_base
    return SampleSet(values, _labels(columns, len(p_base)), "uniform", seed)


def sample_srs_delta(p_base, delta, m, seed, columns=None):
    """Independent draws on ``[(1 - delta) p_base_j, (1 + delta) p_base_j]``."""
    p_base = check_vector(p_base, name="p_base", nonnegative=True)
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    m = check_count(m)
    seed = check_seed(seed)
    rng = np.random.default_rng(seed)
    u = rng.random((m, len(p_base)))
    values = p_base * (1 - delta) + u * (2 * delta * p_base)
    return SampleSet(values, _labels(columns, len(p_base)), "srs", seed,
                     config={"delta": float(delta)})


def reactive_from_pf(p, pf, sign):
    """Reactive power ``P * tan(arccos(pf)) * sign``."""
    return p * np.tan(np.arccos(pf)) * sign


def sample_thayer(p_base, m, seed, columns=None, load_range=(0.6, 1.4),
                  pf_range=(0.8, 1.0), flip_prob=0.10, max_redraws=100,
                  return_total=False):
    """Total-loading rescale procedure with random power factors.

    For every sample, raw shares are drawn on [0, 1) and scaled by the base
    loads, then rescaled so their total equals a target ``P'`` drawn
    uniformly in ``load_range`` times the total base load. Each load's
    reactive power follows from a power factor drawn in ``pf_range`` and a
    sign that is negative with probability ``flip_prob``.

    Returns a SampleSet with columns ``<label>.p`` and ``<label>.q`` per
    load, in that interleaved order. With ``return_total`` the per-sample
    targets ``P'`` are returned as well.
    """
    p_base = check_vector(p_base, name="p_base", nonnegative=True)
    if not p_base.sum() > 0:
        raise ValueError("total base load must be positive")
    m = check_count(m)
    seed = check_seed(seed)
    labels = _labels(columns, len(p_base), prefix="load_")
    rng = np.random.default_rng(seed)
    n = len(p_base)

    raw = rng.random((m, n)) * p_base
    for _ in range(max_redraws):
        zero = raw.sum(axis=1) == 0
        if not zero.any():
            break
        raw[zero] = rng.random((zero.sum(), n)) * p_base
    else:
        raise RuntimeError("could not draw a non-zero raw loading")
    p_total = rng.uniform(*load_range, size=m) * p_base.sum()
    p = raw * (p_total / raw.sum(axis=1))[:, None]
    pf = rng.uniform(*pf_range, size=(m, n))
    sign = np.where(rng.random((m, n)) < flip_prob, -1.0, 1.0)
    q = reactive_from_pf(p, pf, sign)

    values = np.empty((m, 2 * n))
    values[:, 0::2] = p
    values[:, 1::2] = q
    cols = [c for lab in labels for c in (f"{lab}.p", f"{lab}.q")]
    out = SampleSet(values, cols, "thayer", seed,
                    config={"load_range": list(load_range), "pf_range": list(pf_range),
                            "flip_prob": flip_prob})
    return (out, p_total) if return_total else out


def compute_sum_interval(data, extension=0.20, columns=None):
    """Range of row sums of the max-normalised data, widened by ``extension``."""
    values, labels = check_matrix(data, columns, name="data")
    if extension < 0:
        raise ValueError("extension must be >= 0")
    col_max = values.max(axis=0)
    bad = [labels[j] for j in np.flatnonzero(col_max <= 0)]
    if bad:
        raise ValueError(f"columns without a positive maximum cannot be normalised: {bad}")
    sums = (values / col_max).sum(axis=1)
    n = values.shape[1]
    return SumInterval(max(0.0, (1 - extension) * sums.min()),
                       min(float(n), (1 + extension) * sums.max()))


def adapt_entry(s_i, s_j, c):
    """Pull ``s_j`` towards ``s_i`` (positive ``c``) or ``1 - s_i`` (negative ``c``)."""
    if c > 0:
        return s_i + s_j * (1 - c)
    if c < 0:
        return 1 - s_i + s_j * (1 + c)
    return s_j


def adaptation_plan(pcm_values, threshold):
    """Ordered ``(i, j, c)`` adaptations; each ``j`` only by its smallest ``i``."""
    c = np.asarray(pcm_values)
    n = len(c)
    plan = []
    adapted = np.zeros(n, bool)
    for i in range(n):
        for j in range(i + 1, n):
            if not adapted[j] and abs(c[i, j]) >= threshold:
                plan.append((i, j, float(c[i, j])))
                adapted[j] = True
    return plan


def adapt_sample(s, plan, noise_std, rng):
    """Apply the adaptation plan in place to a normalised sample."""
    for i, j, c in plan:
        v = adapt_entry(s[i], s[j], c)
        if noise_std > 0:
            v *= rng.normal(1.0, noise_std)
        s[j] = min(max(v, 0.0), 1.0)
    return s


def initial_sample(n, alpha, rng):
    """Dirichlet shares times a uniform amplitude on [0, n], clipped to [0, 1]."""
    shares = rng.dirichlet(np.full(n, alpha))
    amplitude = rng.uniform(0.0, n)
    return np.clip(shares * amplitude, 0.0, 1.0)


class SamplingAttemptsExceeded(RuntimeError):
    pass


def _draw_correlated(rng, n, plan, interval, cfg):
    for attempt in range(cfg.max_attempts_per_sample):
        s = adapt_sample(initial_sample(n, cfg.dirichlet_alpha, rng), plan, cfg.noise_std, rng)
        if interval.contains(s.sum()):
            return s, attempt
    raise SamplingAttemptsExceeded(
        f"no sample inside [{interval.s_min:.4g}, {interval.s_max:.4g}] after "
        f"{cfg.max_attempts_per_sample} attempts; consider widening the interval "
        "(larger interval_extension)"
    )


def correlation_sample(pcm_, interval, p_max, m, cfg=None, seed=None, n_jobs=1,
                       return_normalized=False):
    """Draw ``m`` correlated samples scaled by ``p_max``.

    Sample ``k`` uses its own random stream derived from ``(seed, k)``,
    including its rejected attempts, so results do not depend on
    ``n_jobs``.
    """
    cfg = cfg or CorrelationSamplingConfig()
    p_max = check_vector(p_max, name="p_max", nonnegative=True)
    values = pcm_.values if isinstance(pcm_, Pcm) else np.asarray(pcm_, dtype=float)
    if values.shape != (len(p_max), len(p_max)):
        raise ValueError(
            f"PCM of shape {values.shape} does not match {len(p_max)} maximum values"
        )
    m = check_count(m)
    seed = check_seed(seed)
    n = len(p_max)
    plan = adaptation_plan(values, cfg.threshold)

    def run(lo, hi):
        return [_draw_correlated(rng, n, plan, interval, cfg)
                for rng in sample_streams(seed, lo, hi)]

    block = 256
    bounds = [(lo, min(lo + block, m)) for lo in range(0, m, block)]
    if n_jobs == 1:
        parts = [run(lo, hi) for lo, hi in bounds]
    else:
        parts = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(run)(lo, hi) for lo, hi in bounds)
    draws = [d for part in parts for d in part]
    s = np.array([d[0] for d in draws])
    rejected = int(sum(d[1] for d in draws))
    columns = pcm_.labels if isinstance(pcm_, Pcm) else _labels(None, n)
    out = SampleSet(s * p_max, columns, "correlation", seed, rejected,
                    config={**asdict(cfg), "s_min": float(interval.s_min),
                            "s_max": float(interval.s_max)})
    return (out, s) if return_normalized else out


class _BaseLoadSampler(BaseEstimator):
    """Shared ``fit`` for samplers driven by a grid's nominal values."""

    def fit(self, X, y=None):
        if isinstance(X, GridModel):
            self.base_ = base_vector(X)
            self.columns_ = tuple(injection_columns(X))
        else:
            self.base_ = check_vector(X, name="base", nonnegative=True)
            self.columns_ = _labels(None, len(self.base_))
        self.n_features_in_ = len(self.base_)
        return self


class UniformSampler(_BaseLoadSampler):
    """Each input uniform between zero and its base value."""

    def __init__(self, random_state=None):
        self.random_state = random_state

    def sample(self, n_samples):
        check_is_fitted(self, "base_")
        return sample_uniform(self.base_, n_samples, self.random_state, self.columns_)


class SRSSampler(_BaseLoadSampler):
    """Each input uniform within ``delta`` of its base value."""

    def __init__(self, delta=0.5, random_state=None):
        self.delta = delta
        self.random_state = random_state

    def sample(self, n_samples):
        check_is_fitted(self, "base_")
        return sample_srs_delta(self.base_, self.delta, n_samples, self.random_state,
                                self.columns_)


class ThayerSampler(BaseEstimator):
    """Total-loading rescale sampler bound to a grid.

    Loads follow :func:`sample_thayer`. Static generators are not part of
    that procedure and are drawn uniformly in ``[0, p_base]`` from an
    independent stream.
    """

    def __init__(self, load_range=(0.6, 1.4), pf_range=(0.8, 1.0), flip_prob=0.10,
                 random_state=None):
        self.load_range = load_range
        self.pf_range = pf_range
        self.flip_prob = flip_prob
        self.random_state = random_state

    def fit(self, X, y=None):
        if not isinstance(X, GridModel):
            raise TypeError("ThayerSampler.fit expects a GridModel")
        self.grid_ = X
        self.columns_ = tuple(injection_columns(X))
        self.n_features_in_ = len(self.columns_)
        return self

    def sample(self, n_samples):
        check_is_fitted(self, "grid_")
        seed = check_seed(self.random_state)
        loads, sgens = self.grid_.loads, self.grid_.sgens
        seq = np.random.SeedSequence(seed)
        load_seed, gen_seed = (int(s.generate_state(1, np.uint64)[0]) for s in seq.spawn(2))
        ls = sample_thayer([l.p_base for l in loads], n_samples, load_seed,
                           columns=[l.name for l in loads], load_range=self.load_range,
                           pf_range=self.pf_range, flip_prob=self.flip_prob)
        by_col = dict(zip(ls.columns, ls.values.T))
        if sgens:
            gs = sample_uniform([g.p_base for g in sgens], n_samples, gen_seed,
                                columns=[f"{g.name}.p" for g in sgens])
            by_col.update(zip(gs.columns, gs.values.T))
        m = len(ls)
        values = np.column_stack([by_col.get(c, np.zeros(m)) for c in self.columns_])
        return SampleSet(values, self.columns_, "thayer", seed, config=ls.config)


class CorrelationSampler(BaseEstimator):
    """Correlation sampling fitted on a time series.

    ``fit`` computes the PCM, the normalised-sum interval and per-column
    maxima from the data (optionally from a random row subset of size
    ``n_rows``); ``sample`` draws new input vectors that keep the strongly
    partially-correlated pairs together.
    """

    def __init__(self, threshold=0.85, noise_std=0.10, interval_extension=0.20,
                 dirichlet_alpha=0.1, max_attempts_per_sample=1000, n_rows=None,
                 ridge=DEFAULT_RIDGE, random_state=None, n_jobs=1):
        self.threshold = threshold
        self.noise_std = noise_std
        self.interval_extension = interval_extension
        self.dirichlet_alpha = dirichlet_alpha
        self.max_attempts_per_sample = max_attempts_per_sample
        self.n_rows = n_rows
        self.ridge = ridge
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self):
        return CorrelationSamplingConfig(self.threshold, self.noise_std,
                                         self.interval_extension,
                                         self.max_attempts_per_sample,
                                         self.dirichlet_alpha)

    def fit(self, X, y=None):
        cfg = self._config()
        values, labels = check_matrix(X)
        if self.n_rows is not None:
            values = values[subset_rows(len(values), self.n_rows, self.random_state)]
        self.pcm_ = pcm(values, ridge=self.ridge, columns=labels)
        self.interval_ = compute_sum_interval(values, cfg.interval_extension, labels)
        self.p_max_ = values.max(axis=0)
        self.feature_names_in_ = np.array(labels, dtype=object)
        self.n_features_in_ = len(labels)
        return self

    def sample(self, n_samples):
        check_is_fitted(self, "pcm_")
        return correlation_sample(self.pcm_, self.interval_, self.p_max_, n_samples,
                                  self._config(), self.random_state, self.n_jobs)
