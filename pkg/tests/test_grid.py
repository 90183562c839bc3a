import json

import pytest
from hypothesis import given, settings, strategies as st

from gridsampler.grid import (GridModel, GridSchemaError, GridValidationError, BusKind,
                              InjectionKind, base_vector, build_synthetic_feeder,
                              grid_to_dict, injection_columns, load_grid, save_grid)
from gridsampler.powerflow import InjectionVector, solve_nr


def test_minimal_feeder():
    g = build_synthetic_feeder(1, 0, seed=99)
    assert g.n_buses == 2
    assert len(g.branches) == 1
    assert [i.kind for i in g.injections] == [InjectionKind.LOAD]
    assert g.slack_bus == 0


def test_reference_feeder_converges(feeder):
    assert feeder.n_buses == 23
    assert feeder.buses[0].kind is BusKind.SLACK
    sol = solve_nr(feeder, InjectionVector.base(feeder))
    assert sol.converged
    assert 0.9 <= sol.v_mag.min() and sol.v_mag.max() <= 1.1


def test_feeder_rejects_no_loads():
    with pytest.raises(ValueError):
        build_synthetic_feeder(0, 0, seed=1)


def test_feeder_is_pure_function_of_arguments():
    assert build_synthetic_feeder(5, 3, 11) == build_synthetic_feeder(5, 3, 11)
    assert build_synthetic_feeder(5, 3, 11) != build_synthetic_feeder(5, 3, 12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 15), st.integers(0, 2**32 - 1))
def test_generated_feeders_connected_and_solvable(n_loads, n_sgens, seed):
    g = build_synthetic_feeder(n_loads, n_sgens, seed)
    assert g.n_buses == n_loads + n_sgens + 1
    # construction validated connectivity; base load must solve in the band
    sol = solve_nr(g, InjectionVector.base(g))
    assert sol.converged and sol.iterations <= 30
    assert 0.9 <= sol.v_mag.min() and sol.v_mag.max() <= 1.1


def test_columns_and_base_vector(feeder):
    cols = injection_columns(feeder)
    base = base_vector(feeder)
    assert len(cols) == 14 * 2 + 8
    assert cols[:2] == ["load_0.p", "load_0.q"]
    assert "sgen_0.q" not in cols
    assert base[0] == feeder.injections[0].p_base


def test_round_trip(tmp_path):
    g = build_synthetic_feeder(3, 1, 7)
    path = tmp_path / "grid.json"
    save_grid(g, path)
    assert load_grid(path) == g


def _write(tmp_path, doc):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(doc))
    return path


def test_two_slack_buses_rejected(tmp_path):
    doc = grid_to_dict(build_synthetic_feeder(2, 0, 1))
    doc["buses"][1]["kind"] = "Slack"
    with pytest.raises(GridValidationError, match="Slack"):
        load_grid(_write(tmp_path, doc))


def test_unknown_bus_reference_rejected(tmp_path):
    doc = grid_to_dict(build_synthetic_feeder(2, 0, 1))
    doc["branches"][0]["to"] = 17
    with pytest.raises(GridValidationError, match="unknown bus 17"):
        load_grid(_write(tmp_path, doc))


def test_schema_error_names_field_path(tmp_path):
    doc = grid_to_dict(build_synthetic_feeder(2, 0, 1))
    doc["injections"][1]["colour"] = "red"
    with pytest.raises(GridSchemaError, match="injections/1"):
        load_grid(_write(tmp_path, doc))
    doc = grid_to_dict(build_synthetic_feeder(2, 0, 1))
    del doc["branches"][0]["x_ohm"]
    with pytest.raises(GridSchemaError, match="branches/0"):
        load_grid(_write(tmp_path, doc))


def test_disconnected_grid_rejected(tmp_path):
    doc = grid_to_dict(build_synthetic_feeder(3, 0, 1))
    doc["branches"].pop(1)
    with pytest.raises(GridValidationError, match="connect"):
        load_grid(_write(tmp_path, doc))


def test_zero_reactance_rejected():
    g = build_synthetic_feeder(2, 0, 1)
    bad = g.branches[0].__class__(0, 1, 0.1, 0.0)
    with pytest.raises(GridValidationError):
        GridModel(g.buses, (bad,) + g.branches[1:], g.injections, g.s_base)


def test_model_is_immutable(feeder):
    with pytest.raises(AttributeError):
        feeder.s_base = 2.0
    assert isinstance(feeder.buses, tuple)
