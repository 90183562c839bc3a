"""Network data model, JSON persistence and synthetic LV feeders."""
import json
from dataclasses import dataclass, field
from enum import Enum

import jsonschema
import numpy as np


class GridValidationError(ValueError):
    """Raised when a grid violates a structural invariant."""


class BusKind(str, Enum):
    SLACK = "Slack"
    PQ = "PQ"


class InjectionKind(str, Enum):
    LOAD = "Load"
    SGEN = "Sgen"


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    v_nominal: float
    name: str = ""


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_shunt: float = 0.0


@dataclass(frozen=True)
class Injection:
    bus: int
    kind: InjectionKind
    p_base: float
    q_base: float
    name: str


@dataclass(frozen=True)
class GridModel:
    """Immutable network description.

    Impedances are in ohm, susceptances in S, powers in MW/MVAr and bus
    voltages in kV. Construction validates every invariant, so a
    ``GridModel`` that exists is always solvable input for the power flow.
    """

    buses: tuple
    branches: tuple
    injections: tuple
    s_base: float = 1.0
    _slack: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "injections", tuple(self.injections))
        object.__setattr__(self, "_slack", validate_grid(self))

    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def slack_bus(self):
        return self._slack

    @property
    def loads(self):
        return [inj for inj in self.injections if inj.kind is InjectionKind.LOAD]

    @property
    def sgens(self):
        return [inj for inj in self.injections if inj.kind is InjectionKind.SGEN]


def validate_grid(model):
    """Check the grid invariants and return the slack bus index."""
    if not model.s_base > 0:
        raise GridValidationError(f"s_base must be positive, got {model.s_base}")
    n = len(model.buses)
    if n < 2:
        raise GridValidationError("a grid needs at least two buses")
    for k, bus in enumerate(model.buses):
        if bus.id != k:
            raise GridValidationError(
                f"bus ids must be dense 0..{n - 1} in order; buses[{k}].id = {bus.id}"
            )
        if not bus.v_nominal > 0:
            raise GridValidationError(f"buses[{k}].v_nominal must be positive")
    slacks = [b.id for b in model.buses if b.kind is BusKind.SLACK]
    if len(slacks) != 1:
        raise GridValidationError(
            f"exactly one Slack bus required, found {len(slacks)}: {slacks}"
        )
    for k, br in enumerate(model.branches):
        for end in (br.from_bus, br.to_bus):
            if not 0 <= end < n:
                raise GridValidationError(f"branches[{k}] references unknown bus {end}")
        if br.from_bus == br.to_bus:
            raise GridValidationError(f"branches[{k}] is a self-loop at bus {br.from_bus}")
        if br.r < 0:
            raise GridValidationError(f"branches[{k}].r must be >= 0")
        if br.x == 0 and br.r == 0:
            raise GridValidationError(f"branches[{k}] has zero impedance")
        if br.x == 0:
            raise GridValidationError(f"branches[{k}].x must be non-zero")
        if model.buses[br.from_bus].v_nominal != model.buses[br.to_bus].v_nominal:
            raise GridValidationError(
                f"branches[{k}] joins buses of different nominal voltage "
                "(transformers are not supported)"
            )
    for k, inj in enumerate(model.injections):
        if not 0 <= inj.bus < n:
            raise GridValidationError(f"injections[{k}] references unknown bus {inj.bus}")
        if inj.p_base < 0:
            raise GridValidationError(f"injections[{k}].p_base must be >= 0")
    names = [inj.name for inj in model.injections]
    if len(set(names)) != len(names):
        raise GridValidationError("injection names must be unique")
    if not any(inj.kind is InjectionKind.LOAD for inj in model.injections):
        raise GridValidationError("a grid needs at least one Load")
    if not _is_connected(n, model.branches):
        raise GridValidationError("branch graph does not connect all buses")
    return slacks[0]


def _is_connected(n, branches):
    adj = [[] for _ in range(n)]
    for br in branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == n


def injection_columns(model):
    """Column labels binding time series or samples to grid injections.

    Every injection contributes ``<name>.p``; loads (and generators with a
    non-zero reactive base) also contribute ``<name>.q``.
    """
    cols = []
    for inj in model.injections:
        cols.append(f"{inj.name}.p")
        if inj.kind is InjectionKind.LOAD or inj.q_base != 0:
            cols.append(f"{inj.name}.q")
    return cols


def base_vector(model):
    """Nominal values aligned with :func:`injection_columns`."""
    vals = []
    for inj in model.injections:
        vals.append(inj.p_base)
        if inj.kind is InjectionKind.LOAD or inj.q_base != 0:
            vals.append(inj.q_base)
    return np.array(vals, dtype=float)


# Power factor of the synthetic households' nominal reactive power.
SYNTHETIC_POWER_FACTOR = 0.95
# Resistance-to-reactance ratio typical of LV cable.
_R_OVER_X = 2.5
_TARGET_DROP = 0.05


def build_synthetic_feeder(n_loads, n_sgens=0, seed=0, v_kv=0.4):
    """Radial LV feeder with ``n_loads`` households and ``n_sgens`` PV units.

    Bus 0 is the slack; buses ``1..n_loads + n_sgens`` form a chain, each
    carrying exactly one injection in a seed-dependent order. Household
    peaks are drawn in 2-6 kW, PV ratings in 3-10 kW. All segments share one
    impedance, sized so the linearised voltage deviation is 5% in the worse
    of two cases: every load at base with no generation, or every generator
    at base with no load.
    """
    if int(n_loads) != n_loads or n_loads < 1:
        raise ValueError(f"n_loads must be >= 1, got {n_loads}")
    if int(n_sgens) != n_sgens or n_sgens < 0:
        raise ValueError(f"n_sgens must be >= 0, got {n_sgens}")
    n_loads, n_sgens = int(n_loads), int(n_sgens)
    rng = np.random.default_rng(seed)
    n_inj = n_loads + n_sgens

    tan_phi = np.tan(np.arccos(SYNTHETIC_POWER_FACTOR))
    p_load = np.round(rng.uniform(2.0, 6.0, n_loads), 1) * 1e-3
    p_sgen = np.round(rng.uniform(3.0, 10.0, n_sgens), 1) * 1e-3
    position = rng.permutation(n_inj) + 1

    injections = []
    for k in range(n_loads):
        injections.append(Injection(int(position[k]), InjectionKind.LOAD,
                                    float(p_load[k]), float(p_load[k] * tan_phi),
                                    f"load_{k}"))
    for k in range(n_sgens):
        injections.append(Injection(int(position[n_loads + k]), InjectionKind.SGEN,
                                    float(p_sgen[k]), 0.0, f"sgen_{k}"))

    s_base = 1.0
    # Linearised drop along a chain: sum over segments of r*P + x*Q flowing
    # through it, with uniform r and x = r / _R_OVER_X.
    load_flow = np.zeros(n_inj + 1)
    gen_flow = np.zeros(n_inj + 1)
    for inj in injections:
        if inj.kind is InjectionKind.LOAD:
            load_flow[inj.bus] += (inj.p_base + inj.q_base / _R_OVER_X) / s_base
        else:
            gen_flow[inj.bus] += inj.p_base / s_base
    # segment k feeds buses k..n_inj
    load_term = np.cumsum(load_flow[::-1])[::-1][1:].sum()
    gen_term = np.cumsum(gen_flow[::-1])[::-1][1:].sum()
    r_pu = _TARGET_DROP / max(load_term, gen_term)
    z_base = v_kv**2 / s_base
    r_ohm = float(r_pu * z_base)
    x_ohm = r_ohm / _R_OVER_X

    buses = [Bus(0, BusKind.SLACK, v_kv, "bus_0")]
    buses += [Bus(k, BusKind.PQ, v_kv, f"bus_{k}") for k in range(1, n_inj + 1)]
    branches = [Branch(k - 1, k, r_ohm, x_ohm, 0.0) for k in range(1, n_inj + 1)]
    return GridModel(buses, branches, injections, s_base)


GRID_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["s_base_mva", "buses", "branches", "injections"],
    "properties": {
        "s_base_mva": {"type": "number", "exclusiveMinimum": 0},
        "buses": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind", "v_kv", "name"],
                "properties": {
                    "id": {"type": "integer", "minimum": 0},
                    "kind": {"enum": [k.value for k in BusKind]},
                    "v_kv": {"type": "number", "exclusiveMinimum": 0},
                    "name": {"type": "string"},
                },
            },
        },
        "branches": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["from", "to", "r_ohm", "x_ohm", "b_s"],
                "properties": {
                    "from": {"type": "integer", "minimum": 0},
                    "to": {"type": "integer", "minimum": 0},
                    "r_ohm": {"type": "number", "minimum": 0},
                    "x_ohm": {"type": "number"},
                    "b_s": {"type": "number"},
                },
            },
        },
        "injections": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["bus", "kind", "p_mw", "q_mvar", "name"],
                "properties": {
                    "bus": {"type": "integer", "minimum": 0},
                    "kind": {"enum": [k.value for k in InjectionKind]},
                    "p_mw": {"type": "number", "minimum": 0},
                    "q_mvar": {"type": "number"},
                    "name": {"type": "string"},
                },
            },
        },
    },
}


class GridSchemaError(ValueError):
    """Raised when a grid file does not match the JSON schema."""


def grid_to_dict(model):
    return {
        "s_base_mva": model.s_base,
        "buses": [{"id": b.id, "kind": b.kind.value, "v_kv": b.v_nominal, "name": b.name}
                  for b in model.buses],
        "branches": [{"from": br.from_bus, "to": br.to_bus, "r_ohm": br.r,
                      "x_ohm": br.x, "b_s": br.b_shunt} for br in model.branches],
        "injections": [{"bus": inj.bus, "kind": inj.kind.value, "p_mw": inj.p_base,
                        "q_mvar": inj.q_base, "name": inj.name}
                       for inj in model.injections],
    }


def grid_from_dict(doc):
    validator = jsonschema.Draft7Validator(GRID_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise GridSchemaError(f"grid schema violation at {path}: {err.message}")
    return GridModel(
        buses=[Bus(b["id"], BusKind(b["kind"]), float(b["v_kv"]), b["name"])
               for b in doc["buses"]],
        branches=[Branch(br["from"], br["to"], float(br["r_ohm"]), float(br["x_ohm"]),
                         float(br["b_s"])) for br in doc["branches"]],
        injections=[Injection(i["bus"], InjectionKind(i["kind"]), float(i["p_mw"]),
                              float(i["q_mvar"]), i["name"]) for i in doc["injections"]],
        s_base=float(doc["s_base_mva"]),
    )


def save_grid(model, path):
    with open(path, "w") as fh:
        json.dump(grid_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_grid(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise GridSchemaError(f"{path}: not valid JSON ({exc})") from exc
    return grid_from_dict(doc)
