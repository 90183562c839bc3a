"""Input validation helpers shared by the estimators and functional API."""
import os

import numpy as np

SEED_ENV_VAR = "GRIDSAMPLER_SEED"


def check_matrix(X, columns=None, *, min_rows=1, name="X"):
    """Return ``(values, columns)`` from a matrix-like input.

    Accepts anything with ``values``/``columns`` attributes (TimeSeriesMatrix,
    SampleSet, pandas.DataFrame) or a plain 2-D array. Columns default to
    ``x0, x1, ...`` when the input carries none.
    """
    if columns is None and hasattr(X, "columns") and hasattr(X, "values"):
        columns = list(X.columns)
        values = X.values
    else:
        values = X
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {values.shape}")
    if columns is None:
        columns = [f"x{j}" for j in range(values.shape[1])]
    columns = [str(c) for c in columns]
    if len(columns) != values.shape[1]:
        raise ValueError(
            f"{name} has {values.shape[1]} columns but {len(columns)} labels"
        )
    if len(set(columns)) != len(columns):
        raise ValueError(f"{name} has duplicate column labels")
    if values.shape[0] < min_rows:
        raise ValueError(
            f"{name} needs at least {min_rows} rows, got {values.shape[0]}"
        )
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return values, columns


def check_vector(v, *, name="vector", nonnegative=False):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or infinite values")
    if nonnegative and np.any(v < 0):
        bad = np.flatnonzero(v < 0).tolist()
        raise ValueError(f"{name} must be non-negative (offending entries: {bad})")
    return v


def check_count(m, *, name="m", minimum=1):
    if isinstance(m, bool) or int(m) != m or m < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {m!r}")
    return int(m)


def check_seed(seed):
    """Resolve a seed to a non-negative int.

    ``None`` falls back to the ``GRIDSAMPLER_SEED`` environment variable and
    then to fresh OS entropy, so the returned value can always be recorded.
    """
    if seed is None:
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None and env.strip():
            seed = int(env)
        else:
            return int(np.random.SeedSequence().entropy % 2**64)
    if isinstance(seed, (bool, np.bool_)) or int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)


def sample_streams(seed, start, stop):
    """Independent generators for sample indices ``start..stop-1``.

    Stream ``i`` depends only on ``(seed, i)``, so any partition of the
    index range across workers yields the same draws.
    """
    return [
        np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        for i in range(start, stop)
    ]
