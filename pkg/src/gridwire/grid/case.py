"""Static network description and its YAML document format.

A case document is a mapping with ``system``, ``buses``, ``branches`` and
``generators`` sections; see README for the full schema.  Branch ids follow
the ``from_to_ckt`` convention and generator ids ``bus_ckt``, but any unique
string is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import yaml

from ..errors import CaseError

DEFAULT_RAMP_TAU_S = 5.0
DROOP_GAIN_PER_PMAX = 20.0  # 5% droop unless the case overrides


@dataclass(frozen=True)
class Bus:
    id: int
    substation: int
    kv: float
    load_mw: float = 0.0
    load_mvar: float = 0.0
    shunt_mvar: float = 0.0

    @property
    def has_load(self) -> bool:
        return self.load_mw != 0.0 or self.load_mvar != 0.0

    @property
    def has_shunt(self) -> bool:
        return self.shunt_mvar != 0.0


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: int
    to_bus: int
    x: float
    status: bool = True
    rating_mva: float = 0.0
    transformer: bool = False


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    p_mw: float
    p_min: float = 0.0
    p_max: float = 0.0
    droop_mw_per_unit_freq: float = 0.0
    ramp_tau_s: float = DEFAULT_RAMP_TAU_S
    v_set: float = 1.0
    status: bool = True


@dataclass(frozen=True)
class GridCase:
    name: str
    base_mva: float
    frequency_hz: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]

    @cached_property
    def bus_by_id(self) -> dict[int, Bus]:
        return {b.id: b for b in self.buses}

    @cached_property
    def branch_by_id(self) -> dict[str, Branch]:
        return {b.id: b for b in self.branches}

    @cached_property
    def gen_by_id(self) -> dict[str, Generator]:
        return {g.id: g for g in self.generators}

    @cached_property
    def load_buses(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.has_load)

    @cached_property
    def shunt_buses(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses if b.has_shunt)

    @cached_property
    def substations(self) -> tuple[int, ...]:
        seen: dict[int, None] = {}
        for b in self.buses:
            seen.setdefault(b.substation, None)
        return tuple(seen)

    def device_exists(self, kind: str, key: str) -> bool:
        if kind == "generator":
            return key in self.gen_by_id
        if kind == "branch":
            return key in self.branch_by_id
        if kind == "load":
            return key.isdigit() and int(key) in set(self.load_buses)
        if kind == "shunt":
            return key.isdigit() and int(key) in set(self.shunt_buses)
        if kind == "bus":
            return key.isdigit() and int(key) in self.bus_by_id
        return False


def _require(mapping: dict, key: str, record: str):
    if key not in mapping:
        raise CaseError(f"{record}: missing required field '{key}'")
    return mapping[key]


def _validate(case: GridCase) -> GridCase:
    if case.base_mva <= 0:
        raise CaseError("system: base_mva must be positive")
    seen_bus: set[int] = set()
    for bus in case.buses:
        if bus.id in seen_bus:
            raise CaseError(f"bus {bus.id}: duplicate id")
        seen_bus.add(bus.id)
    seen_branch: set[str] = set()
    for br in case.branches:
        if br.id in seen_branch:
            raise CaseError(f"branch {br.id}: duplicate id")
        seen_branch.add(br.id)
        if br.x <= 0:
            raise CaseError(f"branch {br.id}: reactance must be positive, got {br.x}")
        for end in (br.from_bus, br.to_bus):
            if end not in seen_bus:
                raise CaseError(f"branch {br.id}: references missing bus {end}")
    seen_gen: set[str] = set()
    for gen in case.generators:
        if gen.id in seen_gen:
            raise CaseError(f"generator {gen.id}: duplicate id")
        seen_gen.add(gen.id)
        if gen.bus not in seen_bus:
            raise CaseError(f"generator {gen.id}: references missing bus {gen.bus}")
        if not gen.p_min <= gen.p_mw <= gen.p_max:
            raise CaseError(
                f"generator {gen.id}: initial output {gen.p_mw} outside "
                f"[{gen.p_min}, {gen.p_max}]"
            )
        if gen.droop_mw_per_unit_freq < 0:
            raise CaseError(f"generator {gen.id}: droop gain must be non-negative")
        if gen.ramp_tau_s <= 0:
            raise CaseError(f"generator {gen.id}: ramp_tau_s must be positive")
    return case


def load_case(text: str) -> GridCase:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CaseError(f"case document is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise CaseError("case document must be a mapping")
    system = doc.get("system", {})
    buses = []
    for raw in doc.get("buses", []):
        rec = f"bus {raw.get('id', '?')}"
        buses.append(
            Bus(
                id=int(_require(raw, "id", rec)),
                substation=int(_require(raw, "substation", rec)),
                kv=float(raw.get("kv", 1.0)),
                load_mw=float(raw.get("load_mw", 0.0)),
                load_mvar=float(raw.get("load_mvar", 0.0)),
                shunt_mvar=float(raw.get("shunt_mvar", 0.0)),
            )
        )
    branches = []
    for raw in doc.get("branches", []):
        from_bus = int(_require(raw, "from", f"branch {raw.get('id', '?')}"))
        to_bus = int(_require(raw, "to", f"branch {raw.get('id', '?')}"))
        ckt = str(raw.get("ckt", 1))
        branch_id = str(raw.get("id", f"{from_bus}_{to_bus}_{ckt}"))
        branches.append(
            Branch(
                id=branch_id,
                from_bus=from_bus,
                to_bus=to_bus,
                x=float(_require(raw, "x", f"branch {branch_id}")),
                status=bool(raw.get("status", True)),
                rating_mva=float(raw.get("rating_mva", 0.0)),
                transformer=bool(raw.get("transformer", False)),
            )
        )
    generators = []
    for raw in doc.get("generators", []):
        bus = int(_require(raw, "bus", f"generator {raw.get('id', '?')}"))
        ckt = str(raw.get("ckt", 1))
        gen_id = str(raw.get("id", f"{bus}_{ckt}"))
        p_max = float(_require(raw, "p_max", f"generator {gen_id}"))
        generators.append(
            Generator(
                id=gen_id,
                bus=bus,
                p_mw=float(_require(raw, "p_mw", f"generator {gen_id}")),
                p_min=float(raw.get("p_min", 0.0)),
                p_max=p_max,
                droop_mw_per_unit_freq=float(
                    raw.get("droop_mw_per_unit_freq", DROOP_GAIN_PER_PMAX * p_max)
                ),
                ramp_tau_s=float(raw.get("ramp_tau_s", DEFAULT_RAMP_TAU_S)),
                v_set=float(raw.get("v_set", 1.0)),
                status=bool(raw.get("status", True)),
            )
        )
    case = GridCase(
        name=str(doc.get("name", "unnamed")),
        base_mva=float(system.get("base_mva", 100.0)),
        frequency_hz=float(system.get("frequency_hz", 60.0)),
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
    )
    return _validate(case)


def load_case_file(path: str | Path) -> GridCase:
    return load_case(Path(path).read_text())


def dump_case(case: GridCase) -> str:
    doc = {
        "name": case.name,
        "system": {"base_mva": case.base_mva, "frequency_hz": case.frequency_hz},
        "buses": [
            {
                "id": b.id,
                "substation": b.substation,
                "kv": b.kv,
                "load_mw": b.load_mw,
                "load_mvar": b.load_mvar,
                "shunt_mvar": b.shunt_mvar,
            }
            for b in case.buses
        ],
        "branches": [
            {
                "id": b.id,
                "from": b.from_bus,
                "to": b.to_bus,
                "x": b.x,
                "status": b.status,
                "rating_mva": b.rating_mva,
                "transformer": b.transformer,
            }
            for b in case.branches
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_mw": g.p_mw,
                "p_min": g.p_min,
                "p_max": g.p_max,
                "droop_mw_per_unit_freq": g.droop_mw_per_unit_freq,
                "ramp_tau_s": g.ramp_tau_s,
                "v_set": g.v_set,
                "status": g.status,
            }
            for g in case.generators
        ],
    }
    return yaml.safe_dump(doc, sort_keys=False)
