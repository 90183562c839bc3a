import numpy as np
import pytest

from gridsampler.dataio import generate_synthetic_dataset
from gridsampler.grid import (Branch, Bus, BusKind, GridModel, Injection, InjectionKind,
                              build_synthetic_feeder)


def chain_grid(impedances, loads, v_kv=1.0, b_shunt=0.0):
    """Slack at bus 0 and a chain of PQ buses; ``loads`` are (p, q) per PQ bus in MW."""
    n = len(impedances) + 1
    buses = [Bus(0, BusKind.SLACK, v_kv, "slack")]
    buses += [Bus(k, BusKind.PQ, v_kv, f"b{k}") for k in range(1, n)]
    branches = [Branch(k, k + 1, r, x, b_shunt) for k, (r, x) in enumerate(impedances)]
    injections = [Injection(k + 1, InjectionKind.LOAD, p, q, f"load_{k}")
                  for k, (p, q) in enumerate(loads)]
    return GridModel(buses, branches, injections, 1.0)


@pytest.fixture(scope="session")
def feeder():
    return build_synthetic_feeder(14, 8, 42)


@pytest.fixture(scope="session")
def dataset(feeder):
    return generate_synthetic_dataset(feeder, 5000, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
