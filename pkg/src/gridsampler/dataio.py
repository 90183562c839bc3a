"""Time-series ingestion, synthetic datasets and CSV/JSON file formats."""
import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import SYNTHETIC_POWER_FACTOR, injection_columns
from .powerflow import BatchResult
from .sampling import SampleSet
from .stats import Pcm

STEPS_PER_DAY = 96
DEFAULT_T_STEPS = 35040


class CsvFormatError(ValueError):
    """Malformed CSV input; the message carries the row/column location."""


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """T x N matrix of injection power values with labelled columns.

    ``index`` holds one timestamp per row, either an ISO-8601 string or an
    integer step. ``resolution`` is the step length in minutes.
    """

    values: np.ndarray
    columns: tuple
    index: tuple = None
    resolution: int = 15

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        columns = tuple(str(c) for c in self.columns)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("a TimeSeriesMatrix needs at least one row")
        if values.shape[1] != len(columns):
            raise ValueError("column labels do not match the value matrix")
        if len(set(columns)) != len(columns):
            raise ValueError("column labels must be unique")
        if np.isnan(values).any():
            raise ValueError("time series contains NaN")
        index = self.index
        if index is None:
            index = tuple(str(t) for t in range(len(values)))
        index = tuple(str(t) for t in index)
        if len(index) != len(values):
            raise ValueError("index length does not match the number of rows")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "index", index)

    @property
    def shape(self):
        return self.values.shape

    def column(self, label):
        return self.values[:, self.columns.index(label)]


def _fmt_exact(x):
    return repr(float(x))


def _fmt9(x):
    return format(float(x), ".9g")


def save_timeseries(ts, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", *ts.columns])
        for stamp, row in zip(ts.index, ts.values):
            w.writerow([stamp, *map(_fmt_exact, row)])


def _read_numeric_csv(path, first_label=None):
    """Parse a header + numeric-body CSV; returns (header, first_col, values)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if first_label is not None and (not header or header[0] != first_label):
        raise CsvFormatError(f"{path}: row 1, column 1: expected {first_label!r} header")
    seen = set()
    for col, h in enumerate(header, start=1):
        if h in seen:
            raise CsvFormatError(f"{path}: row 1, column {col}: duplicate header {h!r}")
        seen.add(h)
    skip = 1 if first_label is not None else 0
    n_cols = len(header)
    stamps, body = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_cols:
            raise CsvFormatError(
                f"{path}: row {r}: expected {n_cols} cells, found {len(row)}"
            )
        vals = []
        for c in range(skip, n_cols):
            cell = row[c].strip()
            if cell == "":
                raise CsvFormatError(f"{path}: row {r}, column {c + 1} ({header[c]}): missing value")
            try:
                vals.append(float(cell))
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {r}, column {c + 1} ({header[c]}): "
                    f"non-numeric value {cell!r}"
                ) from None
        if skip:
            stamps.append(row[0].strip())
        body.append(vals)
    values = np.array(body, dtype=float).reshape(len(body), n_cols - skip)
    return header[skip:], stamps, values


def load_timeseries(path, resolution=15):
    columns, stamps, values = _read_numeric_csv(path, first_label="timestamp")
    if len(values) == 0:
        raise CsvFormatError(f"{path}: no data rows")
    return TimeSeriesMatrix(values, columns, stamps, resolution)


def save_samples(samples, path):
    """Write the sample CSV plus a ``.json`` sidecar with provenance."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(samples.columns)
        for row in samples.values:
            w.writerow(map(_fmt_exact, row))
    with open(sidecar_path(path), "w") as fh:
        json.dump(samples.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def sidecar_path(path):
    return Path(path).with_suffix(".json")


def load_samples(path):
    columns, _, values = _read_numeric_csv(path)
    meta = {"strategy": "unknown", "seed": 0, "config": {}, "rejected_count": 0}
    side = sidecar_path(path)
    if side.exists():
        meta.update(json.loads(side.read_text()))
    return SampleSet(values, columns, meta["strategy"], meta["seed"],
                     meta["rejected_count"], meta["config"])


def load_matrix(path):
    """Load either a time series (``timestamp`` first) or a sample CSV."""
    with open(path, newline="") as fh:
        first = fh.readline()
    if first.split(",")[0].strip() == "timestamp":
        return load_timeseries(path)
    return load_samples(path)


def save_pcm(p, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *p.labels])
        for label, row in zip(p.labels, p.values):
            w.writerow([label, *map(_fmt9, row)])


def load_pcm(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    labels = rows[0][1:]
    if [r[0] for r in rows[1:]] != labels:
        raise CsvFormatError(f"{path}: row labels do not match column labels")
    values = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    # 9 significant digits break exact symmetry; restore it
    values = (values + values.T) / 2
    np.fill_diagonal(values, 1.0)
    return Pcm(values, labels)


def save_pcm_long(p, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row_label", "col_label", "value"])
        for i, a in enumerate(p.labels):
            for j, b in enumerate(p.labels):
                w.writerow([a, b, _fmt9(p.values[i, j])])


def save_pq(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "p_mw", "q_mvar", "converged", "iterations"])
        for k in range(len(result)):
            w.writerow([k, _fmt9(result.p_mw[k]), _fmt9(result.q_mvar[k]),
                        int(result.converged[k]), int(result.iterations[k])])


def load_pq(path):
    """Read a P-Q batch CSV back into a :class:`~gridsampler.powerflow.BatchResult`."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    conv = np.array([r["converged"] == "1" for r in rows], dtype=bool)
    return BatchResult(np.array([float(r["p_mw"]) for r in rows]),
                       np.array([float(r["q_mvar"]) for r in rows]),
                       conv, np.array([int(r["iterations"]) for r in rows]))


COMPARISON_FIELDS = ["strategy", "hull_area", "containment", "overlap_ratio",
                     "feasibility", "pcm_fidelity"]


def save_comparison(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_FIELDS)
        for rep in reports:
            d = rep.to_dict()
            w.writerow([d["strategy"], *(_fmt9(d[k]) for k in COMPARISON_FIELDS[1:])])


def save_plot_data(clouds, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "p_mw", "q_mvar"])
        for cloud in clouds:
            for p, q in cloud.points:
                w.writerow([cloud.label, _fmt9(p), _fmt9(q)])


def _ar1(rng, n, rho, size=None):
    shape = (n,) if size is None else (n, size)
    eps = rng.standard_normal(shape) * math.sqrt(1 - rho**2)
    out = np.empty(shape)
    out[0] = rng.standard_normal(shape[1:]) if size else rng.standard_normal()
    for t in range(1, n):
        out[t] = rho * out[t - 1] + eps[t]
    return out


def _bump(hour, centre, width):
    d = (hour - centre + 12) % 24 - 12
    return np.exp(-0.5 * (d / width) ** 2)


def generate_synthetic_dataset(model, t_steps=DEFAULT_T_STEPS, seed=0,
                               power_factor=SYNTHETIC_POWER_FACTOR, pf_jitter=0.01):
    """Synthetic 15-minute household and PV series for every grid injection.

    Households combine a morning/evening daily pattern with a shared
    weather factor and multiplicative lognormal noise, so their marginals
    are right-skewed. Their reactive power follows from a power factor
    jittered around ``power_factor``. PV units share a clear-sky curve and a
    common cloud factor, plus a small unit-specific deviation. Every column
    is scaled so its maximum equals the injection's base value.
    """
    if int(t_steps) != t_steps or t_steps < 1:
        raise ValueError(f"t_steps must be >= 1, got {t_steps}")
    t_steps = int(t_steps)
    rng = np.random.default_rng(seed)
    t = np.arange(t_steps)
    hour = (t % STEPS_PER_DAY) / 4.0
    day = t // STEPS_PER_DAY
    n_days = int(day[-1]) + 1
    season = np.cos(2 * np.pi * ((day % 365) + 10) / 365.0)  # +1 mid-winter

    weather_day = _ar1(rng, n_days, 0.8)[day]
    weather_step = _ar1(rng, t_steps, 0.95)
    shared = 0.25 * weather_day + 0.15 * weather_step

    loads, sgens = model.loads, model.sgens
    series = {}
    tan_nom = math.tan(math.acos(power_factor))
    for inj in loads:
        morning = 6.5 + rng.uniform(0, 2)
        evening = 18.0 + rng.uniform(0, 2.5)
        pattern = (0.25 + 0.5 * _bump(hour, morning, 1.0) + 0.9 * _bump(hour, evening, 1.8)
                   + 0.15 * _bump(hour, 13.0, 2.0))
        pattern = pattern * (1 + 0.2 * season)
        idio = 0.55 * _ar1(rng, t_steps, 0.6)
        p = pattern * np.exp(shared + idio)
        p = p / p.max() * inj.p_base
        pf = np.clip(power_factor + pf_jitter * rng.standard_normal(t_steps), 0.8, 0.999)
        q = p * np.tan(np.arccos(pf))
        q_peak = inj.q_base if inj.q_base > 0 else inj.p_base * tan_nom
        q = q / q.max() * q_peak if q.max() > 0 else q
        series[f"{inj.name}.p"] = p
        series[f"{inj.name}.q"] = q

    if sgens:
        day_len = 12.0 - 4.0 * season
        rise = 12.0 - day_len / 2
        frac = np.clip((hour - rise) / day_len, 0.0, 1.0)
        clear = np.sin(np.pi * frac) ** 1.5 * (0.7 - 0.3 * season)
        cloud_day = rng.beta(2.0, 1.2, n_days)[day]
        cloud_step = np.clip(1 + 0.15 * _ar1(rng, t_steps, 0.9), 0.3, 1.3)
        irradiance = clear * cloud_day * cloud_step
        for inj in sgens:
            tilt = 1 + 0.05 * _ar1(rng, t_steps, 0.8)
            p = np.clip(irradiance * tilt, 0.0, None)
            p = p / p.max() * inj.p_base if p.max() > 0 else p
            series[f"{inj.name}.p"] = p
            if inj.q_base != 0:
                series[f"{inj.name}.q"] = np.zeros(t_steps)

    columns = injection_columns(model)
    values = np.column_stack([series[c] for c in columns])
    return TimeSeriesMatrix(values, columns, tuple(str(k) for k in t), 15)
