"""The live simulator: owns the electrical state, advances it on a fixed
tick, and applies operator commands between solves.

Commands arrive through a thread-safe queue and take effect at the next
tick; readers get immutable snapshots published after every solve.  Each
generator's effective setpoint chases its commanded setpoint through a
first-order lag, and every tick re-dispatches the ramped setpoints through
the droop rule, so generation matches served load exactly at all times
while outputs still move along the familiar exponential approach.
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Callable, Literal

from ..errors import DeviceError
from .case import GridCase
from .dispatch import droop_dispatch, ramp_toward
from .solver import Topology, analyze_islands, solve_dc, solve_qv

log = logging.getLogger(__name__)

DeviceKind = Literal["generator", "branch", "load", "shunt", "bus"]


@dataclass(frozen=True)
class GridState:
    """Snapshot of the electrical state after one solve.  Treat as frozen;
    the simulator never mutates a published instance."""

    time_s: float
    timestamp_ms: int
    freq_dev: float
    theta: dict[int, float]
    voltage: dict[int, float]
    energized: dict[int, bool]
    gen_p: dict[str, float]
    gen_q: dict[str, float]
    gen_setpoint: dict[str, float]
    gen_vset: dict[str, float]
    flow_mw: dict[str, float]
    flow_mvar: dict[str, float]
    statuses: dict[tuple[str, str], bool]
    served_load_mw: dict[int, float]
    served_load_mvar: dict[int, float]
    shunt_out_mvar: dict[int, float]
    faults: tuple[str, ...]

    def device_on(self, kind: str, key: str) -> bool:
        return self.statuses.get((kind, key), False)


@dataclass(frozen=True)
class _SetStatus:
    kind: str
    key: str
    on: bool


@dataclass(frozen=True)
class _SetSetpoint:
    gen_id: str
    field: str  # "mw" | "vpu"
    value: float


class Simulator:
    """Single-owner simulation; see module docstring for the tick contract."""

    def __init__(
        self,
        case: GridCase,
        tick_s: float = 0.1,
        epoch_ms: int = 0,
    ):
        self.case = case
        self.tick_s = tick_s
        self.epoch_ms = epoch_ms
        self._topo = Topology.from_case(case)
        self._setpoint = {g.id: g.p_mw for g in case.generators}
        self._ramped = {g.id: g.p_mw for g in case.generators}
        self._vset = {g.id: g.v_set for g in case.generators}
        self._commands: queue.SimpleQueue = queue.SimpleQueue()
        self._listeners: list[Callable[[GridState], None]] = []
        self._lock = threading.Lock()
        self._state = self._solve(0.0)

    # -- public read side ---------------------------------------------------

    def snapshot(self) -> GridState:
        with self._lock:
            return self._state

    def add_tick_listener(self, listener: Callable[[GridState], None]) -> None:
        self._listeners.append(listener)

    def remove_tick_listener(self, listener: Callable[[GridState], None]) -> None:
        try:
            self._listeners.remove(listener)
        except ValueError:
            pass

    def gen_bus_energized(self, gen_id: str, state: GridState) -> bool:
        gen = self.case.gen_by_id[gen_id]
        return state.energized.get(gen.bus, False)

    # -- command side (thread-safe; applied at the next tick) ----------------

    def apply_breaker(self, branch_id: str, close: bool) -> None:
        if branch_id not in self.case.branch_by_id:
            raise DeviceError(f"unknown branch '{branch_id}'")
        self._commands.put(_SetStatus("branch", branch_id, close))

    def apply_gen_status(self, gen_id: str, on: bool) -> None:
        if gen_id not in self.case.gen_by_id:
            raise DeviceError(f"unknown generator '{gen_id}'")
        self._commands.put(_SetStatus("generator", gen_id, on))

    def apply_device_status(self, kind: str, key: str, on: bool) -> None:
        if kind == "branch":
            self.apply_breaker(key, on)
            return
        if kind == "generator":
            self.apply_gen_status(key, on)
            return
        if kind in ("load", "shunt"):
            if not self.case.device_exists(kind, key):
                raise DeviceError(f"unknown {kind} '{key}'")
            self._commands.put(_SetStatus(kind, key, on))
            return
        raise DeviceError(f"device kind '{kind}' is not controllable")

    def apply_setpoint(self, gen_id: str, field: str, value: float) -> None:
        """field: 'mw' for the MW setpoint, 'vpu' for the voltage setpoint."""
        if gen_id not in self.case.gen_by_id:
            raise DeviceError(f"unknown generator '{gen_id}'")
        if not self.snapshot().device_on("generator", gen_id):
            raise DeviceError(f"generator '{gen_id}' is off-line; setpoint rejected")
        if field not in ("mw", "vpu"):
            raise DeviceError(f"unknown setpoint field '{field}'")
        self._commands.put(_SetSetpoint(gen_id, field, float(value)))

    # -- tick ----------------------------------------------------------------

    def tick(self) -> GridState:
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                break
            self._apply(cmd)
        state = self._solve(self._state.time_s + self.tick_s, advance=True)
        with self._lock:
            self._state = state
        for listener in list(self._listeners):
            listener(state)
        return state

    def run(self, clock, stop: threading.Event) -> None:
        from ..clock import run_paced

        run_paced(self.tick, self.tick_s, clock, stop)

    # -- internals -------------------------------------------------------

    def _apply(self, cmd) -> None:
        if isinstance(cmd, _SetStatus):
            if cmd.kind == "branch":
                self._topo.branch_on[cmd.key] = cmd.on
            elif cmd.kind == "generator":
                was_on = self._topo.gen_on[cmd.key]
                self._topo.gen_on[cmd.key] = cmd.on
                if was_on and not cmd.on:
                    self._ramped[cmd.key] = 0.0  # tripped unit restarts from zero
            elif cmd.kind == "load":
                self._topo.load_on[int(cmd.key)] = cmd.on
            elif cmd.kind == "shunt":
                self._topo.shunt_on[int(cmd.key)] = cmd.on
            return
        if isinstance(cmd, _SetSetpoint):
            gen = self.case.gen_by_id[cmd.gen_id]
            if not self._topo.gen_on[cmd.gen_id]:
                log.warning("setpoint for off-line generator %s ignored", cmd.gen_id)
                return
            if cmd.field == "mw":
                value = cmd.value
                if value < gen.p_min or value > gen.p_max:
                    clamped = min(max(value, gen.p_min), gen.p_max)
                    log.warning(
                        "MW setpoint %.6g for %s outside [%.6g, %.6g], clamped to %.6g",
                        value, gen.id, gen.p_min, gen.p_max, clamped,
                    )
                    value = clamped
                self._setpoint[cmd.gen_id] = value
            else:
                self._vset[cmd.gen_id] = cmd.value

    def _solve(self, time_s: float, advance: bool = False) -> GridState:
        case = self.case
        if advance:
            for gen in case.generators:
                if self._topo.gen_on[gen.id]:
                    self._ramped[gen.id] = ramp_toward(
                        self._ramped[gen.id],
                        self._setpoint[gen.id],
                        self.tick_s,
                        gen.ramp_tau_s,
                    )

        islands = analyze_islands(case, self._topo)
        dispatch = droop_dispatch(case, self._topo, self._ramped, islands)
        for island in dispatch.shed_islands:
            islands = islands.deactivate(island)
        faults = list(dispatch.faults)

        angles, flow_mw, dc_faults = solve_dc(case, self._topo, dispatch.gen_p, islands)
        faults += dc_faults

        vset_by_bus: dict[int, float] = {}
        for gen in case.generators:
            if self._topo.gen_on[gen.id] and gen.bus not in vset_by_bus:
                vset_by_bus[gen.bus] = self._vset[gen.id]
        volts, flow_mvar, gen_bus_q, qv_faults = solve_qv(
            case, self._topo, vset_by_bus, islands
        )
        faults += qv_faults

        energized = {b.id: islands.bus_energized(b.id) for b in case.buses}

        gen_p: dict[str, float] = {}
        gen_q: dict[str, float] = {}
        gens_per_bus: dict[int, int] = {}
        for gen in case.generators:
            if self._topo.gen_on[gen.id] and energized[gen.bus]:
                gens_per_bus[gen.bus] = gens_per_bus.get(gen.bus, 0) + 1
        for gen in case.generators:
            alive = self._topo.gen_on[gen.id] and energized[gen.bus]
            gen_p[gen.id] = dispatch.gen_p[gen.id] if alive else 0.0
            if alive:
                gen_q[gen.id] = gen_bus_q.get(gen.bus, 0.0) / gens_per_bus[gen.bus]
            else:
                gen_q[gen.id] = 0.0

        served_mw: dict[int, float] = {}
        served_mvar: dict[int, float] = {}
        for bus_id in case.load_buses:
            bus = case.bus_by_id[bus_id]
            on = self._topo.load_on[bus_id] and energized[bus_id]
            served_mw[bus_id] = bus.load_mw if on else 0.0
            served_mvar[bus_id] = bus.load_mvar if on else 0.0
        shunt_out: dict[int, float] = {}
        for bus_id in case.shunt_buses:
            bus = case.bus_by_id[bus_id]
            on = self._topo.shunt_on[bus_id] and energized[bus_id]
            shunt_out[bus_id] = bus.shunt_mvar if on else 0.0

        statuses: dict[tuple[str, str], bool] = {}
        for br in case.branches:
            statuses[("branch", br.id)] = self._topo.branch_on[br.id]
        for gen in case.generators:
            statuses[("generator", gen.id)] = self._topo.gen_on[gen.id]
        for bus_id in case.load_buses:
            statuses[("load", str(bus_id))] = self._topo.load_on[bus_id]
        for bus_id in case.shunt_buses:
            statuses[("shunt", str(bus_id))] = self._topo.shunt_on[bus_id]
        for b in case.buses:
            statuses[("bus", str(b.id))] = energized[b.id]

        return GridState(
            time_s=time_s,
            timestamp_ms=self.epoch_ms + int(round(time_s * 1000.0)),
            freq_dev=dispatch.freq_dev,
            theta=angles,
            voltage=volts,
            energized=energized,
            gen_p=gen_p,
            gen_q=gen_q,
            gen_setpoint=dict(self._setpoint),
            gen_vset=dict(self._vset),
            flow_mw=flow_mw,
            flow_mvar=flow_mvar,
            statuses=statuses,
            served_load_mw=served_mw,
            served_load_mvar=served_mvar,
            shunt_out_mvar=shunt_out,
            faults=tuple(faults),
        )
