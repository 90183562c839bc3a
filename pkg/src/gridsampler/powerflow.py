"""AC power flow (Newton-Raphson, polar form) and slack-bus P-Q aggregation."""
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_matrix
from .grid import InjectionKind

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 30
# Fixed chunking keeps per-sample arithmetic identical for any n_jobs.
_CHUNK = 256


def build_ybus(model):
    """Bus admittance matrix in per unit on ``model.s_base``."""
    n = model.n_buses
    ybus = np.zeros((n, n), dtype=complex)
    for k, br in enumerate(model.branches):
        z_base = model.buses[br.from_bus].v_nominal ** 2 / model.s_base
        z = complex(br.r, br.x) / z_base
        if z == 0:
            raise ValueError(f"branch {k} has zero impedance")
        y = 1.0 / z
        b_half = 0.5j * br.b_shunt * z_base
        f, t = br.from_bus, br.to_bus
        ybus[f, f] += y + b_half
        ybus[t, t] += y + b_half
        ybus[f, t] -= y
        ybus[t, f] -= y
    return ybus


@dataclass(frozen=True)
class InjectionVector:
    """Per-injection active/reactive power in MW/MVAr, in grid injection order."""

    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if p.shape != q.shape or p.ndim != 1:
            raise ValueError("p and q must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
            raise ValueError("injection values must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def base(cls, model, scale=1.0):
        return cls(np.array([i.p_base for i in model.injections]) * scale,
                   np.array([i.q_base for i in model.injections]) * scale)

    @classmethod
    def zeros(cls, model):
        n = len(model.injections)
        return cls(np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class PfSolution:
    v_mag: np.ndarray
    v_ang: np.ndarray
    slack_p: float
    slack_q: float
    converged: bool
    iterations: int


@dataclass(frozen=True)
class BatchResult:
    """Power-flow outcome for a batch; one row per input sample."""

    p_mw: np.ndarray
    q_mvar: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray

    def __len__(self):
        return len(self.converged)

    @property
    def feasibility(self):
        return float(self.converged.mean()) if len(self) else float("nan")

    def points(self):
        """(K, 2) array of slack (P, Q) for converged samples only."""
        mask = self.converged
        return np.column_stack([self.p_mw[mask], self.q_mvar[mask]])


def _incidence(model):
    """Matrix mapping per-injection power to per-bus net injection (gen - load)."""
    a = np.zeros((len(model.injections), model.n_buses))
    for k, inj in enumerate(model.injections):
        a[k, inj.bus] = 1.0 if inj.kind is InjectionKind.SGEN else -1.0
    return a


def bus_injections(model, p, q):
    """Net complex injection per bus in p.u. for stacked injection rows."""
    p = np.atleast_2d(p)
    q = np.atleast_2d(q)
    a = _incidence(model)
    return (p @ a + 1j * (q @ a)) / model.s_base


def _mismatch(ybus, v, s_spec, pq):
    s_calc = v * np.conj(v @ ybus.T)
    ds = (s_calc - s_spec)[:, pq]
    return np.concatenate([ds.real, ds.imag], axis=1)


def _jacobian(ybus, v, pq):
    n = v.shape[1]
    eye = np.eye(n)
    ibus = v @ ybus.T
    vnorm = v / np.abs(v)
    ds_dva = 1j * v[:, :, None] * np.conj(ibus[:, :, None] * eye - ybus[None] * v[:, None, :])
    ds_dvm = (v[:, :, None] * np.conj(ybus[None] * vnorm[:, None, :])
              + np.conj(ibus)[:, :, None] * eye * vnorm[:, None, :])
    ix = np.ix_(np.arange(v.shape[0]), pq, pq)
    a, m = ds_dva[ix], ds_dvm[ix]
    top = np.concatenate([a.real, m.real], axis=2)
    bottom = np.concatenate([a.imag, m.imag], axis=2)
    return np.concatenate([top, bottom], axis=1)


def power_mismatch(model, v_ang, v_mag, p, q):
    """Mismatch [dP(pq), dQ(pq)] in p.u. at a given polar voltage state."""
    ybus = build_ybus(model)
    pq = _pq_buses(model)
    v = (np.asarray(v_mag) * np.exp(1j * np.asarray(v_ang)))[None]
    return _mismatch(ybus, v, bus_injections(model, p, q), pq)[0]


def mismatch_jacobian(model, v_ang, v_mag):
    """Analytic Jacobian of :func:`power_mismatch` w.r.t. [angle(pq), |V|(pq)]."""
    ybus = build_ybus(model)
    pq = _pq_buses(model)
    v = (np.asarray(v_mag) * np.exp(1j * np.asarray(v_ang)))[None]
    return _jacobian(ybus, v, pq)[0]


def _pq_buses(model):
    return np.array([b for b in range(model.n_buses) if b != model.slack_bus])


def _solve_steps(jac, rhs):
    try:
        return np.linalg.solve(jac, rhs[..., None])[..., 0], np.ones(len(jac), bool)
    except np.linalg.LinAlgError:
        steps = np.zeros_like(rhs)
        ok = np.ones(len(jac), bool)
        for k in range(len(jac)):
            try:
                steps[k] = np.linalg.solve(jac[k], rhs[k])
            except np.linalg.LinAlgError:
                ok[k] = False
        return steps, ok


def _newton(ybus, s_spec, slack, pq, tol, max_iter):
    """Vectorised Newton-Raphson over the rows of ``s_spec``.

    Each row iterates independently from flat start; rows leave the active
    set once converged, singular or diverged.
    """
    m, n = s_spec.shape
    npq = len(pq)
    v = np.ones((m, n), dtype=complex)
    converged = np.zeros(m, bool)
    iterations = np.full(m, max_iter)
    active = np.arange(m)
    with np.errstate(all="ignore"):
        for it in range(max_iter + 1):
            if not active.size:
                break
            mis = _mismatch(ybus, v[active], s_spec[active], pq)
            norm = np.abs(mis).max(axis=1) if npq else np.zeros(active.size)
            done = norm <= tol
            converged[active[done]] = True
            iterations[active[done]] = it
            broken = ~np.isfinite(norm)
            iterations[active[broken]] = it
            active = active[~done & ~broken]
            mis = mis[~done & ~broken]
            if it == max_iter or not active.size:
                break
            jac = _jacobian(ybus, v[active], pq)
            dx, ok = _solve_steps(jac, -mis)
            iterations[active[~ok]] = it
            active, dx = active[ok], dx[ok]
            va = np.angle(v[active][:, pq]) + dx[:, :npq]
            vm = np.abs(v[active][:, pq]) + dx[:, npq:]
            v[active[:, None], pq[None, :]] = vm * np.exp(1j * va)
    return v, converged, iterations


def _slack_power(model, ybus, v, s_spec):
    """External-grid supply at the slack bus, MW/MVAr."""
    s = model.slack_bus
    s_net = v[:, s] * np.conj(v @ ybus[s])
    return (s_net - s_spec[:, s]) * model.s_base


def _solve_block(model, ybus, p, q, tol, max_iter):
    s_spec = bus_injections(model, p, q)
    v, conv, its = _newton(ybus, s_spec, model.slack_bus, _pq_buses(model), tol, max_iter)
    with np.errstate(all="ignore"):
        s_slack = _slack_power(model, ybus, v, s_spec)
    return v, s_slack, conv, its


def solve_nr(model, inj, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve one power flow from flat start.

    Non-convergence (iteration cap, singular Jacobian, numeric blow-up) is
    reported through ``converged=False`` rather than raised.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if len(inj.p) != len(model.injections):
        raise ValueError(
            f"injection vector has {len(inj.p)} entries, grid has {len(model.injections)}"
        )
    ybus = build_ybus(model)
    v, s_slack, conv, its = _solve_block(model, ybus, inj.p, inj.q, tol, max_iter)
    return PfSolution(np.abs(v[0]), np.angle(v[0]), float(s_slack[0].real),
                      float(s_slack[0].imag), bool(conv[0]), int(its[0]))


def bind_columns(model, columns):
    """Map ``<injection>.p`` / ``<injection>.q`` labels onto injection indices.

    Returns ``(p_idx, q_idx)``: for each injection the source column of its
    active and reactive power, -1 where no reactive column is given.
    """
    index = {inj.name: k for k, inj in enumerate(model.injections)}
    p_idx = np.full(len(index), -1)
    q_idx = np.full(len(index), -1)
    for c, label in enumerate(columns):
        name, _, role = label.rpartition(".")
        if name not in index or role not in ("p", "q"):
            raise ValueError(f"column {label!r} does not bind to a grid injection")
        target = p_idx if role == "p" else q_idx
        target[index[name]] = c
    missing = [model.injections[k].name for k in np.flatnonzero(p_idx < 0)]
    if missing:
        raise ValueError(f"no active-power column for injections {missing}")
    return p_idx, q_idx


def injections_from_matrix(model, values, columns):
    p_idx, q_idx = bind_columns(model, columns)
    p = values[:, p_idx]
    q = np.where(q_idx >= 0, values[:, np.maximum(q_idx, 0)], 0.0)
    return p, q


def batch_pf(model, samples, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, n_jobs=1,
             columns=None):
    """Run the power flow for every row of a sample or time-series matrix.

    Column labels are bound to injections before any solve. Rows are solved
    in fixed-size chunks, optionally on ``n_jobs`` threads; the output order
    always equals the input order.
    """
    if columns is None and hasattr(samples, "columns"):
        columns = list(samples.columns)
        values = np.asarray(samples.values, dtype=float)
    else:
        values = np.asarray(samples, dtype=float)
    if columns is None:
        raise ValueError("column labels are required to bind samples to injections")
    if values.ndim != 2 or values.shape[1] != len(columns):
        raise ValueError("sample matrix does not match its column labels")
    p, q = injections_from_matrix(model, values, list(columns))
    ybus = build_ybus(model)
    m = len(values)
    if m == 0:
        empty = np.zeros(0)
        return BatchResult(empty, empty.copy(), np.zeros(0, bool), np.zeros(0, int))

    def run(lo):
        hi = min(lo + _CHUNK, m)
        _, s_slack, conv, its = _solve_block(model, ybus, p[lo:hi], q[lo:hi], tol, max_iter)
        return s_slack, conv, its

    starts = range(0, m, _CHUNK)
    if n_jobs == 1:
        parts = [run(lo) for lo in starts]
    else:
        parts = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(run)(lo) for lo in starts)
    s_slack = np.concatenate([s for s, _, _ in parts])
    conv = np.concatenate([c for _, c, _ in parts])
    its = np.concatenate([i for _, _, i in parts])
    p_mw = np.where(conv, s_slack.real, np.nan)
    q_mvar = np.where(conv, s_slack.imag, np.nan)
    return BatchResult(p_mw, q_mvar, conv, its)


class SlackPowerFlow(TransformerMixin, BaseEstimator):
    """Transformer mapping injection samples to slack-bus (P, Q).

    ``transform`` returns an ``(M, 2)`` array in MW/MVAr with NaN rows for
    samples whose power flow did not converge.
    """

    def __init__(self, grid=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, n_jobs=1):
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        if self.grid is None:
            raise ValueError("SlackPowerFlow needs a grid")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if X is not None:
            _, cols = check_matrix(X, min_rows=0)
            bind_columns(self.grid, cols)
            self.feature_names_in_ = np.array(cols, dtype=object)
        self.ybus_ = build_ybus(self.grid)
        return self

    def transform(self, X):
        if not hasattr(self, "ybus_"):
            self.fit()
        result = batch_pf(self.grid, X, self.tol, self.max_iter, self.n_jobs)
        self.last_result_ = result
        return np.column_stack([result.p_mw, result.q_mvar])
