"""Outstation point maps: which grid-device field each DNP3 point carries.

A map document binds points to devices, assigns zero-based indices per point
type, an event class (0 = static only, 1..3 = event buffers) and a deadband
for analogs.  Tag names follow the
``DataType_SubstationID_DeviceType_Keyfield_DataName`` pattern, e.g.
``AI_560_Branch_5047_5260_1_MVAR``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path

import yaml

from .errors import MapError
from .grid.case import GridCase

MAX_INDEX = 65535
VOLTAGE_DEADBAND_PU = 0.005
DEADBAND_FRACTION = 0.02  # of branch rating / generator capability


class PointType(str, Enum):
    BINARY_INPUT = "BinaryInput"
    ANALOG_INPUT = "AnalogInput"
    COUNTER_INPUT = "CounterInput"
    BINARY_OUTPUT = "BinaryOutput"
    ANALOG_OUTPUT = "AnalogOutput"

    @property
    def abbrev(self) -> str:
        return _ABBREV[self]


_ABBREV = {
    PointType.BINARY_INPUT: "BI",
    PointType.ANALOG_INPUT: "AI",
    PointType.COUNTER_INPUT: "CI",
    PointType.BINARY_OUTPUT: "BO",
    PointType.ANALOG_OUTPUT: "AO",
}


class DeviceType(str, Enum):
    GENERATOR = "Generator"
    BRANCH = "Branch"
    LOAD = "Load"
    SHUNT = "Shunt"
    BUS = "Bus"

    @property
    def sim_kind(self) -> str:
        return self.value.lower()


class PointField(str, Enum):
    STATUS = "STATUS"
    MW = "MW"
    MVAR = "MVAR"
    VPU = "VPU"
    MWSETPOINT = "MWSETPOINT"
    VPUSETPOINT = "VPUSETPOINT"


_MEASURE_DEVICES = (DeviceType.GENERATOR, DeviceType.BRANCH, DeviceType.LOAD, DeviceType.SHUNT)

# Which fields a point type may carry per device type.
LEGAL_FIELDS: dict[tuple[PointType, DeviceType], tuple[PointField, ...]] = {}
for _dev in DeviceType:
    LEGAL_FIELDS[(PointType.BINARY_INPUT, _dev)] = (PointField.STATUS,)
for _dev in _MEASURE_DEVICES:
    LEGAL_FIELDS[(PointType.ANALOG_INPUT, _dev)] = (PointField.MW, PointField.MVAR)
    LEGAL_FIELDS[(PointType.COUNTER_INPUT, _dev)] = (PointField.MW, PointField.MVAR)
    LEGAL_FIELDS[(PointType.BINARY_OUTPUT, _dev)] = (PointField.STATUS,)
LEGAL_FIELDS[(PointType.ANALOG_INPUT, DeviceType.BUS)] = (PointField.VPU,)
LEGAL_FIELDS[(PointType.COUNTER_INPUT, DeviceType.BUS)] = (PointField.VPU,)
LEGAL_FIELDS[(PointType.ANALOG_OUTPUT, DeviceType.GENERATOR)] = (
    PointField.MWSETPOINT,
    PointField.VPUSETPOINT,
)


@dataclass(frozen=True)
class DNP3Point:
    point_type: PointType
    index: int
    device_type: DeviceType
    keyfield: str
    field: PointField
    event_class: int = 0
    deadband: float = 0.0

    def describe(self) -> str:
        return (
            f"{self.point_type.value}[{self.index}] -> "
            f"{self.device_type.value} {self.keyfield} {self.field.value}"
        )


@dataclass(frozen=True)
class OutstationDef:
    number: int
    name: str
    points: tuple[DNP3Point, ...] = ()

    def by_type(self, point_type: PointType) -> tuple[DNP3Point, ...]:
        return tuple(
            sorted(
                (p for p in self.points if p.point_type == point_type),
                key=lambda p: p.index,
            )
        )

    def find(self, point_type: PointType, index: int) -> DNP3Point | None:
        for p in self.points:
            if p.point_type == point_type and p.index == index:
                return p
        return None


def tag_name(point: DNP3Point, outstation: OutstationDef) -> str:
    return (
        f"{point.point_type.abbrev}_{outstation.number}_"
        f"{point.device_type.value}_{point.keyfield}_{point.field.value}"
    )


def parse_tag(tag: str) -> tuple[str, int, DeviceType, str, PointField]:
    """Split a tag back into (abbrev, outstation, device, keyfield, field)."""
    parts = tag.split("_")
    if len(parts) < 5:
        raise MapError(f"tag '{tag}' does not match the naming pattern")
    abbrev, number, device = parts[0], parts[1], parts[2]
    data_field = parts[-1]
    keyfield = "_".join(parts[3:-1])
    try:
        return (
            abbrev,
            int(number),
            DeviceType(device),
            keyfield,
            PointField(data_field),
        )
    except ValueError as exc:
        raise MapError(f"tag '{tag}' does not match the naming pattern: {exc}") from exc


@dataclass(frozen=True)
class PointMap:
    outstations: tuple[OutstationDef, ...]

    @cached_property
    def by_number(self) -> dict[int, OutstationDef]:
        return {o.number: o for o in self.outstations}

    @cached_property
    def tags(self) -> dict[str, tuple[OutstationDef, DNP3Point]]:
        out: dict[str, tuple[OutstationDef, DNP3Point]] = {}
        for station in self.outstations:
            for point in station.points:
                out[tag_name(point, station)] = (station, point)
        return out

    def resolve(self, tag: str) -> tuple[OutstationDef, DNP3Point]:
        try:
            return self.tags[tag]
        except KeyError:
            raise MapError(f"unknown tag '{tag}'") from None


def _validate_outstation(station: OutstationDef, case: GridCase | None) -> None:
    per_type: dict[PointType, list[int]] = {}
    for point in station.points:
        legal = LEGAL_FIELDS.get((point.point_type, point.device_type), ())
        if point.field not in legal:
            raise MapError(
                f"outstation {station.number}: {point.describe()}: field "
                f"{point.field.value} not legal for {point.point_type.value} on "
                f"{point.device_type.value}"
            )
        if point.event_class not in (0, 1, 2, 3):
            raise MapError(
                f"outstation {station.number}: {point.describe()}: event class "
                f"{point.event_class} out of range"
            )
        if point.deadband < 0:
            raise MapError(
                f"outstation {station.number}: {point.describe()}: negative deadband"
            )
        if not 0 <= point.index <= MAX_INDEX:
            raise MapError(
                f"outstation {station.number}: {point.describe()}: index out of range"
            )
        per_type.setdefault(point.point_type, []).append(point.index)
        if case is not None and not case.device_exists(
            point.device_type.sim_kind, point.keyfield
        ):
            raise MapError(
                f"outstation {station.number}: {point.describe()}: no such device in case"
            )
    for point_type, indices in per_type.items():
        if len(set(indices)) != len(indices):
            dupes = sorted({i for i in indices if indices.count(i) > 1})
            raise MapError(
                f"outstation {station.number}: duplicate {point_type.value} index {dupes[0]}"
            )
        expected = list(range(len(indices)))
        if sorted(indices) != expected:
            raise MapError(
                f"outstation {station.number}: {point_type.value} indices must be "
                f"zero-based and contiguous, got {sorted(indices)}"
            )


def validate_map(point_map: PointMap, case: GridCase | None = None) -> PointMap:
    numbers: set[int] = set()
    for station in point_map.outstations:
        if not 0 <= station.number <= 65519:
            raise MapError(f"outstation number {station.number} outside 0..65519")
        if station.number in numbers:
            raise MapError(f"duplicate outstation number {station.number}")
        numbers.add(station.number)
        _validate_outstation(station, case)
    return point_map


def parse_map(text: str, case: GridCase | None = None) -> PointMap:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise MapError(f"map document is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict) or "outstations" not in doc:
        raise MapError("map document must be a mapping with an 'outstations' list")
    stations = []
    for raw_station in doc["outstations"]:
        points = []
        for raw in raw_station.get("points", []):
            try:
                point = DNP3Point(
                    point_type=PointType(raw["type"]),
                    index=int(raw["index"]),
                    device_type=DeviceType(raw["device"]),
                    keyfield=str(raw["key"]),
                    field=PointField(raw["field"]),
                    event_class=int(raw.get("class", 0)),
                    deadband=float(raw.get("deadband", 0.0)),
                )
            except (KeyError, ValueError) as exc:
                raise MapError(f"bad point record {raw}: {exc}") from exc
            points.append(point)
        stations.append(
            OutstationDef(
                number=int(raw_station["number"]),
                name=str(raw_station.get("name", f"outstation-{raw_station['number']}")),
                points=tuple(points),
            )
        )
    return validate_map(PointMap(outstations=tuple(stations)), case)


def parse_map_file(path: str | Path, case: GridCase | None = None) -> PointMap:
    return parse_map(Path(path).read_text(), case)


def dump_map(point_map: PointMap) -> str:
    doc = {
        "outstations": [
            {
                "number": station.number,
                "name": station.name,
                "points": [
                    {
                        "type": p.point_type.value,
                        "index": p.index,
                        "device": p.device_type.value,
                        "key": p.keyfield,
                        "field": p.field.value,
                        "class": p.event_class,
                        "deadband": p.deadband,
                    }
                    for p in station.points
                ],
            }
            for station in point_map.outstations
        ]
    }
    return yaml.safe_dump(doc, sort_keys=False)


@dataclass(frozen=True)
class AutogenPolicy:
    binary_event_class: int = 1
    analog_event_class: int = 2
    deadband_fraction: float = DEADBAND_FRACTION
    voltage_deadband: float = VOLTAGE_DEADBAND_PU


def _gen_deadband(case: GridCase, gen_id: str, policy: AutogenPolicy) -> float:
    return policy.deadband_fraction * case.gen_by_id[gen_id].p_max


def _branch_deadband(case: GridCase, branch_id: str, policy: AutogenPolicy) -> float:
    rating = case.branch_by_id[branch_id].rating_mva
    return policy.deadband_fraction * (rating if rating > 0 else 100.0)


def _bus_deadband(case: GridCase, bus_id: int, policy: AutogenPolicy) -> float:
    bus = case.bus_by_id[bus_id]
    scale = max(abs(bus.load_mw), abs(bus.load_mvar), abs(bus.shunt_mvar), 1.0)
    return policy.deadband_fraction * scale


def autogen_map(case: GridCase, policy: AutogenPolicy | None = None) -> PointMap:
    """One outstation per substation; deterministic declaration-order indexing.

    Every device gets a status binary input; generators, branches, loads and
    shunts get MW/MVAR analogs plus a status binary output; generators also
    get MW/voltage setpoint analog outputs; buses get a voltage analog.
    """
    policy = policy or AutogenPolicy()
    stations = []
    for substation in case.substations:
        counters = {pt: 0 for pt in PointType}
        points: list[DNP3Point] = []

        def add(point_type, device_type, key, data_field, event_class=0, deadband=0.0):
            index = counters[point_type]
            if index > MAX_INDEX:
                raise MapError(
                    f"substation {substation}: more than {MAX_INDEX + 1} "
                    f"{point_type.value} points"
                )
            counters[point_type] += 1
            points.append(
                DNP3Point(
                    point_type=point_type,
                    index=index,
                    device_type=device_type,
                    keyfield=key,
                    field=data_field,
                    event_class=event_class,
                    deadband=deadband,
                )
            )

        buses_here = [b for b in case.buses if b.substation == substation]
        bus_ids = {b.id for b in buses_here}
        gens = [g for g in case.generators if g.bus in bus_ids]
        branches = [b for b in case.branches if b.from_bus in bus_ids]
        loads = [b.id for b in buses_here if b.has_load]
        shunts = [b.id for b in buses_here if b.has_shunt]

        for g in gens:
            db = _gen_deadband(case, g.id, policy)
            add(PointType.BINARY_INPUT, DeviceType.GENERATOR, g.id, PointField.STATUS,
                policy.binary_event_class)
            add(PointType.ANALOG_INPUT, DeviceType.GENERATOR, g.id, PointField.MW,
                policy.analog_event_class, db)
            add(PointType.ANALOG_INPUT, DeviceType.GENERATOR, g.id, PointField.MVAR,
                policy.analog_event_class, db)
            add(PointType.ANALOG_OUTPUT, DeviceType.GENERATOR, g.id, PointField.MWSETPOINT)
            add(PointType.ANALOG_OUTPUT, DeviceType.GENERATOR, g.id, PointField.VPUSETPOINT)
            add(PointType.BINARY_OUTPUT, DeviceType.GENERATOR, g.id, PointField.STATUS)
        for b in branches:
            db = _branch_deadband(case, b.id, policy)
            add(PointType.BINARY_INPUT, DeviceType.BRANCH, b.id, PointField.STATUS,
                policy.binary_event_class)
            add(PointType.ANALOG_INPUT, DeviceType.BRANCH, b.id, PointField.MW,
                policy.analog_event_class, db)
            add(PointType.ANALOG_INPUT, DeviceType.BRANCH, b.id, PointField.MVAR,
                policy.analog_event_class, db)
            add(PointType.BINARY_OUTPUT, DeviceType.BRANCH, b.id, PointField.STATUS)
        for bus_id in loads:
            db = _bus_deadband(case, bus_id, policy)
            key = str(bus_id)
            add(PointType.BINARY_INPUT, DeviceType.LOAD, key, PointField.STATUS,
                policy.binary_event_class)
            add(PointType.ANALOG_INPUT, DeviceType.LOAD, key, PointField.MW,
                policy.analog_event_class, db)
            add(PointType.ANALOG_INPUT, DeviceType.LOAD, key, PointField.MVAR,
                policy.analog_event_class, db)
            add(PointType.BINARY_OUTPUT, DeviceType.LOAD, key, PointField.STATUS)
        for bus_id in shunts:
            db = _bus_deadband(case, bus_id, policy)
            key = str(bus_id)
            add(PointType.BINARY_INPUT, DeviceType.SHUNT, key, PointField.STATUS,
                policy.binary_event_class)
            add(PointType.ANALOG_INPUT, DeviceType.SHUNT, key, PointField.MW,
                policy.analog_event_class, db)
            add(PointType.ANALOG_INPUT, DeviceType.SHUNT, key, PointField.MVAR,
                policy.analog_event_class, db)
            add(PointType.BINARY_OUTPUT, DeviceType.SHUNT, key, PointField.STATUS)
        for b in buses_here:
            key = str(b.id)
            add(PointType.BINARY_INPUT, DeviceType.BUS, key, PointField.STATUS,
                policy.binary_event_class)
            add(PointType.ANALOG_INPUT, DeviceType.BUS, key, PointField.VPU,
                policy.analog_event_class, policy.voltage_deadband)

        name = f"substation-{substation}"
        stations.append(OutstationDef(number=substation, name=name, points=tuple(points)))
    return validate_map(PointMap(outstations=tuple(stations)), case)
