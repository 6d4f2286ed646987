"""Linear network solves: DC MW flow and the voltage-magnitude analog for
MVAR, both on sparse susceptance matrices with per-island handling.

Islands without an on-line generator are de-energized: angles, voltages and
flows in them read zero and their devices report offline quality.  A
numerically singular island is likewise de-energized and reported rather
than aborting the simulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .case import GridCase


@dataclass(frozen=True)
class Topology:
    """Run-time on/off overlay over the static case."""

    branch_on: dict[str, bool]
    gen_on: dict[str, bool]
    load_on: dict[int, bool]
    shunt_on: dict[int, bool]

    @classmethod
    def from_case(cls, case: GridCase) -> "Topology":
        return cls(
            branch_on={b.id: b.status for b in case.branches},
            gen_on={g.id: g.status for g in case.generators},
            load_on={b: True for b in case.load_buses},
            shunt_on={b: True for b in case.shunt_buses},
        )

    def copy(self) -> "Topology":
        return Topology(
            branch_on=dict(self.branch_on),
            gen_on=dict(self.gen_on),
            load_on=dict(self.load_on),
            shunt_on=dict(self.shunt_on),
        )


@dataclass(frozen=True)
class IslandMap:
    component: dict[int, int]  # bus id -> island index
    energized: dict[int, bool]  # island index -> has an on-line generator

    def bus_energized(self, bus_id: int) -> bool:
        return self.energized[self.component[bus_id]]

    def deactivate(self, island: int) -> "IslandMap":
        energized = dict(self.energized)
        energized[island] = False
        return IslandMap(component=self.component, energized=energized)


def analyze_islands(case: GridCase, topo: Topology) -> IslandMap:
    ids = [b.id for b in case.buses]
    pos = {bus_id: i for i, bus_id in enumerate(ids)}
    rows, cols = [], []
    for br in case.branches:
        if topo.branch_on.get(br.id, False):
            rows.append(pos[br.from_bus])
            cols.append(pos[br.to_bus])
    n = len(ids)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    component = {bus_id: int(labels[pos[bus_id]]) for bus_id in ids}
    energized = {i: False for i in range(count)}
    for gen in case.generators:
        if topo.gen_on.get(gen.id, False):
            energized[component[gen.bus]] = True
    return IslandMap(component=component, energized=energized)


def _positions(case: GridCase) -> tuple[list[int], dict[int, int]]:
    ids = [b.id for b in case.buses]
    return ids, {bus_id: i for i, bus_id in enumerate(ids)}


def _laplacian(case: GridCase, topo: Topology, pos: Mapping[int, int]) -> csr_matrix:
    """Weighted graph Laplacian over in-service branches, 1/x per edge."""
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for br in case.branches:
        if not topo.branch_on.get(br.id, False):
            continue
        i, j = pos[br.from_bus], pos[br.to_bus]
        w = 1.0 / br.x
        rows += [i, j, i, j]
        cols += [i, j, j, i]
        vals += [w, w, -w, -w]
    n = len(pos)
    return csr_matrix((vals, (rows, cols)), shape=(n, n))


def _solve_island(sub: csr_matrix, rhs: np.ndarray) -> np.ndarray | None:
    """Sparse solve returning None when the island system is singular."""
    try:
        with np.errstate(all="ignore"):
            sol = spsolve(sub, rhs)
    except Exception:
        return None
    sol = np.atleast_1d(sol)
    if not np.all(np.isfinite(sol)):
        return None
    return sol


def solve_dc(
    case: GridCase,
    topo: Topology,
    gen_p_mw: Mapping[str, float],
    islands: IslandMap | None = None,
) -> tuple[dict[int, float], dict[str, float], list[str]]:
    """Bus angles (rad) and per-branch MW flow at the from end.

    ``gen_p_mw`` is the dispatched output per on-line generator; loads come
    from the case filtered through the topology.  Injections must balance
    per island (the dispatcher guarantees this); one reference angle per
    energized island pins the solution.  Returns (angles, flows, faults).
    """
    if islands is None:
        islands = analyze_islands(case, topo)
    ids, pos = _positions(case)
    n = len(ids)

    injection = np.zeros(n)
    for gen in case.generators:
        if topo.gen_on.get(gen.id, False) and islands.bus_energized(gen.bus):
            injection[pos[gen.bus]] += gen_p_mw.get(gen.id, 0.0)
    for bus in case.buses:
        if bus.has_load and topo.load_on.get(bus.id, False) and islands.bus_energized(bus.id):
            injection[pos[bus.id]] -= bus.load_mw
    injection /= case.base_mva

    laplacian = _laplacian(case, topo, pos)

    theta = np.zeros(n)
    faults: list[str] = []
    by_island: dict[int, list[int]] = {}
    for bus_id in ids:
        by_island.setdefault(islands.component[bus_id], []).append(pos[bus_id])
    for island in sorted(by_island):
        members = by_island[island]
        if not islands.energized[island] or len(members) == 1:
            continue
        keep = members[1:]  # first member holds the reference angle
        sol = _solve_island(csr_matrix(laplacian[np.ix_(keep, keep)]), injection[keep])
        if sol is None:
            islands = islands.deactivate(island)
            faults.append(f"island of bus {ids[members[0]]}: singular MW solve, de-energized")
            continue
        theta[keep] = sol

    angles = {bus_id: float(theta[pos[bus_id]]) for bus_id in ids}
    flows: dict[str, float] = {}
    for br in case.branches:
        on = topo.branch_on.get(br.id, False) and islands.bus_energized(br.from_bus)
        if on:
            flows[br.id] = float(
                (theta[pos[br.from_bus]] - theta[pos[br.to_bus]]) / br.x * case.base_mva
            )
        else:
            flows[br.id] = 0.0
    return angles, flows, faults


def solve_qv(
    case: GridCase,
    topo: Topology,
    vset_by_bus: Mapping[int, float],
    islands: IslandMap | None = None,
) -> tuple[dict[int, float], dict[str, float], dict[int, float], list[str]]:
    """Voltage magnitudes, per-branch MVAR at the from end, and the net
    reactive injection each setpoint-held bus must supply.

    Buses in ``vset_by_bus`` (on-line generator buses) are held at their
    setpoint; other energized buses solve the linear susceptance system with
    loads and shunts as constant-MVAR injections.  De-energized buses read
    zero volts.  Returns (voltages, mvar flows, per-bus generator MVAR,
    faults).
    """
    if islands is None:
        islands = analyze_islands(case, topo)
    ids, pos = _positions(case)
    n = len(ids)

    q_injection = np.zeros(n)
    for bus in case.buses:
        if not islands.bus_energized(bus.id):
            continue
        q = 0.0
        if bus.has_load and topo.load_on.get(bus.id, False):
            q -= bus.load_mvar
        if bus.has_shunt and topo.shunt_on.get(bus.id, False):
            q += bus.shunt_mvar
        q_injection[pos[bus.id]] = q / case.base_mva

    laplacian = _laplacian(case, topo, pos)

    voltage = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    for bus_id, v in vset_by_bus.items():
        if islands.bus_energized(bus_id):
            voltage[pos[bus_id]] = v
            fixed[pos[bus_id]] = True

    faults: list[str] = []
    by_island: dict[int, list[int]] = {}
    for bus_id in ids:
        by_island.setdefault(islands.component[bus_id], []).append(pos[bus_id])
    fixed_idx = np.flatnonzero(fixed)
    for island in sorted(by_island):
        if not islands.energized[island]:
            continue
        free = [m for m in by_island[island] if not fixed[m]]
        if not free:
            continue
        sub = csr_matrix(laplacian[np.ix_(free, free)])
        boundary = laplacian[np.ix_(free, fixed_idx)] @ voltage[fixed_idx]
        rhs = q_injection[free] - np.asarray(boundary).ravel()
        sol = _solve_island(sub, rhs)
        if sol is None:
            islands = islands.deactivate(island)
            for m in by_island[island]:
                voltage[m] = 0.0
            faults.append(
                f"island of bus {ids[by_island[island][0]]}: singular Q-V solve, de-energized"
            )
            continue
        voltage[free] = sol

    volts = {bus_id: float(voltage[pos[bus_id]]) for bus_id in ids}
    qflows: dict[str, float] = {}
    for br in case.branches:
        on = topo.branch_on.get(br.id, False) and islands.bus_energized(br.from_bus)
        if on:
            qflows[br.id] = float(
                (voltage[pos[br.from_bus]] - voltage[pos[br.to_bus]]) / br.x * case.base_mva
            )
        else:
            qflows[br.id] = 0.0

    # Reactive power each voltage-held bus must inject to hold its setpoint.
    gen_bus_q: dict[int, float] = {}
    for bus_id in vset_by_bus:
        if not islands.bus_energized(bus_id):
            gen_bus_q[bus_id] = 0.0
            continue
        out = 0.0
        for br in case.branches:
            if not topo.branch_on.get(br.id, False):
                continue
            if br.from_bus == bus_id:
                out += qflows[br.id]
            elif br.to_bus == bus_id:
                out -= qflows[br.id]
        bus = case.bus_by_id[bus_id]
        if bus.has_load and topo.load_on.get(bus_id, False):
            out += bus.load_mvar
        if bus.has_shunt and topo.shunt_on.get(bus_id, False):
            out -= bus.shunt_mvar
        gen_bus_q[bus_id] = out
    return volts, qflows, gen_bus_q, faults
