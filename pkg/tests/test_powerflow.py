import numpy as np
import pytest
from sklearn.base import clone

from gridsampler.grid import GridModel, GridValidationError, build_synthetic_feeder, \
    injection_columns
from gridsampler.powerflow import (InjectionVector, SlackPowerFlow, _solve_steps,
                                   batch_pf, build_ybus, mismatch_jacobian,
                                   solve_nr)

from conftest import chain_grid
from oracles import fd_jacobian, gauss_seidel


def test_ybus_two_bus_unit_reactance():
    g = chain_grid([(0.0, 1.0)], [(0.0, 0.0)], v_kv=1.0)
    np.testing.assert_allclose(build_ybus(g), [[-1j, 1j], [1j, -1j]], atol=1e-15)


def test_no_branches_is_disconnected():
    g = chain_grid([(0.0, 1.0)], [(0.0, 0.0)])
    with pytest.raises(GridValidationError, match="connect"):
        GridModel(g.buses, (), g.injections, 1.0)


def test_ybus_three_bus_chain_by_hand():
    b = 0.02
    g = chain_grid([(0.5, 1.0), (1.0, 2.0)], [(0.0, 0.0), (0.0, 0.0)], v_kv=1.0, b_shunt=b)
    y1, y2 = 1 / complex(0.5, 1.0), 1 / complex(1.0, 2.0)
    expected = np.array([
        [y1 + 0.5j * b, -y1, 0],
        [-y1, y1 + y2 + 1j * b, -y2],
        [0, -y2, y2 + 0.5j * b],
    ])
    ybus = build_ybus(g)
    np.testing.assert_allclose(ybus, expected, atol=1e-14)
    np.testing.assert_allclose(ybus.sum(axis=1), [0.5j * b, 1j * b, 0.5j * b], atol=1e-14)


def test_zero_injection_gives_flat_profile(feeder):
    sol = solve_nr(feeder, InjectionVector.zeros(feeder))
    assert sol.converged
    np.testing.assert_allclose(sol.v_mag, 1.0, atol=1e-12)
    assert abs(sol.slack_p) <= 1e-10 and abs(sol.slack_q) <= 1e-10


def test_zero_injection_line_charging_only():
    b = 1e-3
    g = chain_grid([(0.1, 0.3), (0.1, 0.3)], [(0.0, 0.0), (0.0, 0.0)], v_kv=1.0, b_shunt=b)
    sol = solve_nr(g, InjectionVector.zeros(g))
    v = sol.v_mag * np.exp(1j * sol.v_ang)
    # all reactive power comes from the shunts: Q_slack = series I^2 X - shunt V^2 B/2
    series = sum(abs((v[k] - v[k + 1]) / complex(0.1, 0.3)) ** 2 * 0.3 for k in range(2))
    shunt = sum(b / 2 * (abs(v[k]) ** 2 + abs(v[k + 1]) ** 2) for k in range(2))
    assert sol.slack_q < 0
    assert sol.slack_q == pytest.approx(series - shunt, abs=1e-12)


def test_two_bus_matches_gauss_seidel():
    g = chain_grid([(0.0, 1.0)], [(0.1, 0.0)], v_kv=1.0)
    sol = solve_nr(g, InjectionVector([0.1], [0.0]))
    v = gauss_seidel(g, [0.1], [0.0])
    assert sol.converged
    np.testing.assert_allclose(sol.v_mag * np.exp(1j * sol.v_ang), v, atol=1e-6)
    # closed form for a lossless line: P = V1 V2 sin(d) / X
    assert np.sin(-sol.v_ang[1]) * sol.v_mag[1] == pytest.approx(0.1, abs=1e-9)


def test_three_bus_matches_gauss_seidel():
    g = chain_grid([(0.05, 0.1), (0.08, 0.12)], [(0.3, 0.1), (0.2, 0.15)], v_kv=1.0)
    p, q = [0.3, 0.2], [0.1, 0.15]
    sol = solve_nr(g, InjectionVector(p, q))
    v = gauss_seidel(g, p, q)
    np.testing.assert_allclose(sol.v_mag * np.exp(1j * sol.v_ang), v, atol=1e-6)


def _branch_losses(model, sol):
    v = sol.v_mag * np.exp(1j * sol.v_ang)
    total = 0j
    for br in model.branches:
        zb = model.buses[br.from_bus].v_nominal ** 2 / model.s_base
        z = complex(br.r, br.x) / zb
        i = (v[br.from_bus] - v[br.to_bus]) / z
        total += z * abs(i) ** 2
    return total * model.s_base


def _balance_gap(model, inj, sol):
    losses = _branch_losses(model, sol)
    load = sum(p for p, i in zip(inj.p, model.injections) if i.kind.value == "Load")
    gen = sum(p for p, i in zip(inj.p, model.injections) if i.kind.value == "Sgen")
    assert losses.real >= 0
    return abs(sol.slack_p - (load - gen + losses.real))


def test_power_balance_and_nonnegative_losses(feeder, rng):
    # the gap is the sum of per-bus residuals, so solve tightly to see 1e-8
    base = InjectionVector.base(feeder)
    for _ in range(10):
        scale = rng.uniform(0, 1.4, len(base.p))
        inj = InjectionVector(base.p * scale, base.q * scale)
        sol = solve_nr(feeder, inj, tol=1e-10)
        assert sol.converged
        assert _balance_gap(feeder, inj, sol) <= 1e-8


def test_power_balance_gap_bounded_by_residuals_at_default_tol(feeder):
    inj = InjectionVector.base(feeder)
    sol = solve_nr(feeder, inj)
    assert _balance_gap(feeder, inj, sol) <= (feeder.n_buses - 1) * 1e-8 * feeder.s_base


def test_permutation_invariance(feeder, rng):
    base = InjectionVector.base(feeder)
    order = rng.permutation(len(feeder.injections))
    permuted = GridModel(feeder.buses, feeder.branches,
                         [feeder.injections[k] for k in order], feeder.s_base)
    a = solve_nr(feeder, base)
    b = solve_nr(permuted, InjectionVector(base.p[order], base.q[order]))
    np.testing.assert_allclose(a.v_mag, b.v_mag, atol=1e-12)
    assert a.slack_p == pytest.approx(b.slack_p, abs=1e-12)


def test_jacobian_matches_finite_differences(rng):
    g = build_synthetic_feeder(4, 2, 3)
    base = InjectionVector.base(g)
    for _ in range(20):
        va = np.r_[0.0, rng.normal(0, 0.1, g.n_buses - 1)]
        vm = np.r_[1.0, rng.uniform(0.85, 1.15, g.n_buses - 1)]
        jac = mismatch_jacobian(g, va, vm)
        fd = fd_jacobian(g, va, vm, base.p, base.q)
        scale = np.abs(jac).max()
        np.testing.assert_allclose(jac, fd, rtol=1e-6, atol=1e-6 * scale)


def test_absurd_load_does_not_converge(feeder):
    sol = solve_nr(feeder, InjectionVector.base(feeder, scale=1000.0))
    assert not sol.converged
    assert sol.iterations == 30


def test_singular_step_is_flagged_not_raised():
    jac = np.stack([np.eye(2), np.zeros((2, 2))])
    steps, ok = _solve_steps(jac, np.ones((2, 2)))
    assert ok.tolist() == [True, False]
    np.testing.assert_array_equal(steps[0], [1.0, 1.0])


def test_tol_must_be_positive(feeder):
    with pytest.raises(ValueError):
        solve_nr(feeder, InjectionVector.zeros(feeder), tol=0)


def test_batch_of_zero_vectors(feeder):
    cols = injection_columns(feeder)
    res = batch_pf(feeder, np.zeros((7, len(cols))), columns=cols)
    assert res.converged.all()
    assert np.unique(res.points(), axis=0).shape == (1, 2)


def test_batch_of_base_vectors_feasible(feeder):
    from gridsampler.grid import base_vector
    cols = injection_columns(feeder)
    res = batch_pf(feeder, np.tile(base_vector(feeder), (50, 1)), columns=cols)
    assert res.feasibility == 1.0


def test_empty_batch(feeder):
    cols = injection_columns(feeder)
    res = batch_pf(feeder, np.zeros((0, len(cols))), columns=cols)
    assert len(res) == 0 and res.points().shape == (0, 2)


def test_column_mismatch_rejected_before_solving(feeder):
    cols = injection_columns(feeder)
    with pytest.raises(ValueError, match="does not bind"):
        batch_pf(feeder, np.zeros((3, len(cols))), columns=cols[:-1] + ["nobody.p"])
    with pytest.raises(ValueError, match="no active-power column"):
        batch_pf(feeder, np.zeros((3, 1)), columns=["load_0.q"])


def test_batch_order_and_thread_independence(feeder, dataset):
    head = dataset.values[:700]
    a = batch_pf(feeder, head, columns=dataset.columns)
    b = batch_pf(feeder, head, columns=dataset.columns, n_jobs=3)
    np.testing.assert_array_equal(a.p_mw, b.p_mw)
    np.testing.assert_array_equal(a.q_mvar, b.q_mvar)
    order = np.random.default_rng(0).permutation(len(head))
    c = batch_pf(feeder, head[order], columns=dataset.columns)
    np.testing.assert_allclose(c.p_mw, a.p_mw[order], rtol=0, atol=1e-14)
    # batch path equals the single-sample path
    single = solve_nr(feeder, InjectionVector(*_pq_row(feeder, dataset, 5)))
    assert a.p_mw[5] == pytest.approx(single.slack_p, abs=1e-14)


def _pq_row(model, ts, k):
    from gridsampler.powerflow import injections_from_matrix
    p, q = injections_from_matrix(model, ts.values[k:k + 1], list(ts.columns))
    return p[0], q[0]


def test_batch_marks_nonconverged_rows(feeder):
    from gridsampler.grid import base_vector
    cols = injection_columns(feeder)
    x = np.vstack([base_vector(feeder), 1000 * base_vector(feeder)])
    res = batch_pf(feeder, x, columns=cols)
    assert res.converged.tolist() == [True, False]
    assert np.isnan(res.p_mw[1])
    assert len(res.points()) == 1


def test_slack_power_flow_transformer(feeder, dataset):
    est = SlackPowerFlow(grid=feeder, tol=1e-9)
    assert est.get_params()["tol"] == 1e-9
    assert clone(est).get_params()["max_iter"] == 30
    pq = est.fit(dataset).transform(dataset)
    assert pq.shape == (len(dataset.values), 2)
    assert np.isfinite(pq).all()
