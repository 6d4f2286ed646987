"""Resolve a mapped point against a simulation snapshot."""

from __future__ import annotations

from ..grid.case import GridCase
from ..grid.sim import GridState
from ..pointmap import DeviceType, DNP3Point, OutstationDef, PointField, PointType
from .events import PointReading


def device_bus(case: GridCase, point: DNP3Point) -> int | None:
    if point.device_type == DeviceType.GENERATOR:
        gen = case.gen_by_id.get(point.keyfield)
        return gen.bus if gen else None
    if point.device_type == DeviceType.BRANCH:
        branch = case.branch_by_id.get(point.keyfield)
        return branch.from_bus if branch else None
    # loads, shunts and buses key on the bus id itself
    try:
        return int(point.keyfield)
    except ValueError:
        return None


def read_point(case: GridCase, state: GridState, point: DNP3Point) -> PointReading:
    """Current engineering value and online quality for one point."""
    bus = device_bus(case, point)
    energized = state.energized.get(bus, False) if bus is not None else False
    kind = point.device_type.sim_kind
    key = point.keyfield

    if point.point_type == PointType.COUNTER_INPUT:
        # accepted in maps but served as a constant; flagged experimental
        return PointReading(value=0.0, online=True)

    if point.field == PointField.STATUS:
        if point.device_type == DeviceType.BUS:
            return PointReading(value=energized, online=True)
        return PointReading(value=state.device_on(kind, key), online=energized)

    if point.field == PointField.VPU:
        return PointReading(value=state.voltage.get(bus, 0.0), online=energized)

    if point.field == PointField.MWSETPOINT:
        return PointReading(value=state.gen_setpoint.get(key, 0.0), online=energized)
    if point.field == PointField.VPUSETPOINT:
        return PointReading(value=state.gen_vset.get(key, 0.0), online=energized)

    if point.device_type == DeviceType.GENERATOR:
        value = state.gen_p.get(key, 0.0) if point.field == PointField.MW else state.gen_q.get(key, 0.0)
        return PointReading(value=value, online=energized)
    if point.device_type == DeviceType.BRANCH:
        value = (
            state.flow_mw.get(key, 0.0)
            if point.field == PointField.MW
            else state.flow_mvar.get(key, 0.0)
        )
        return PointReading(value=value, online=energized)
    if point.device_type == DeviceType.LOAD:
        value = (
            state.served_load_mw.get(bus, 0.0)
            if point.field == PointField.MW
            else state.served_load_mvar.get(bus, 0.0)
        )
        return PointReading(value=value, online=energized)
    if point.device_type == DeviceType.SHUNT:
        value = 0.0 if point.field == PointField.MW else state.shunt_out_mvar.get(bus, 0.0)
        return PointReading(value=value, online=energized)
    return PointReading(value=0.0, online=False)


def read_station(
    case: GridCase, state: GridState, station: OutstationDef
) -> dict[tuple[PointType, int], PointReading]:
    return {
        (p.point_type, p.index): read_point(case, state, p) for p in station.points
    }
