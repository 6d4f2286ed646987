"""Droop dispatch: proportional sharing of the load/setpoint imbalance.

The system frequency deviation settles where total output meets total load::

    freq_dev = (sum(setpoints) - sum(load)) / sum(droop_gain)
    output_i = setpoint_i - droop_gain_i * freq_dev

Units at a limit are pinned there and the residual re-shared over the rest,
so outputs always sum exactly to load.  An island that cannot balance within
its limits is shed (de-energized) and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..errors import DispatchError
from .case import GridCase
from .solver import IslandMap, Topology, analyze_islands


def ramp_toward(current: float, target: float, dt: float, tau: float) -> float:
    """First-order approach: moves by (target-current)*(1-e^(-dt/tau))."""
    return current + (target - current) * (1.0 - math.exp(-dt / tau))


def share_imbalance(
    setpoints: Sequence[float],
    gains: Sequence[float],
    p_min: Sequence[float],
    p_max: Sequence[float],
    load: float,
) -> tuple[float, list[float]]:
    """Proportional sharing with limit handling for one island.

    Returns (freq_dev, outputs); outputs sum to ``load`` exactly.  Raises
    :class:`DispatchError` when the island cannot balance within limits.
    """
    n = len(setpoints)
    if n == 0:
        if load != 0.0:
            raise DispatchError("no generation available for nonzero load")
        return 0.0, []
    if sum(p_max) < load:
        raise DispatchError(f"capacity {sum(p_max):.6g} MW below load {load:.6g} MW")
    if sum(p_min) > load:
        raise DispatchError(f"minimum generation {sum(p_min):.6g} MW above load {load:.6g} MW")

    pinned: dict[int, float] = {}
    freq = 0.0
    for _ in range(n + 1):
        free = [i for i in range(n) if i not in pinned]
        if not free:
            break
        gain_sum = sum(gains[i] for i in free)
        residual = load - sum(pinned.values())
        if gain_sum <= 0.0:
            raise DispatchError("no droop response left to balance the island")
        freq = (sum(setpoints[i] for i in free) - residual) / gain_sum
        outputs = {i: setpoints[i] - gains[i] * freq for i in free}
        newly = {}
        for i in free:
            if outputs[i] > p_max[i]:
                newly[i] = p_max[i]
            elif outputs[i] < p_min[i]:
                newly[i] = p_min[i]
        if not newly:
            result = [0.0] * n
            for i, v in pinned.items():
                result[i] = v
            for i, v in outputs.items():
                result[i] = v
            return freq, result
        pinned.update(newly)
    raise DispatchError("dispatch failed to converge within limits")


@dataclass(frozen=True)
class DispatchSolution:
    freq_dev: float  # load-weighted across energized islands
    gen_p: dict[str, float]  # MW per generating unit
    slack_share: dict[str, float]  # MW each unit moved off its setpoint
    island_freq: dict[int, float]
    shed_islands: tuple[int, ...]
    faults: tuple[str, ...]


def droop_dispatch(
    case: GridCase,
    topo: Topology,
    setpoints: Mapping[str, float],
    islands: IslandMap | None = None,
) -> DispatchSolution:
    """Dispatch every energized island; shed the infeasible ones."""
    if islands is None:
        islands = analyze_islands(case, topo)

    members: dict[int, list] = {}
    for gen in case.generators:
        if topo.gen_on.get(gen.id, False) and islands.bus_energized(gen.bus):
            members.setdefault(islands.component[gen.bus], []).append(gen)

    load_by_island: dict[int, float] = {}
    for bus in case.buses:
        island = islands.component[bus.id]
        if not islands.energized[island]:
            continue
        if bus.has_load and topo.load_on.get(bus.id, False):
            load_by_island[island] = load_by_island.get(island, 0.0) + bus.load_mw

    gen_p: dict[str, float] = {g.id: 0.0 for g in case.generators}
    slack: dict[str, float] = {g.id: 0.0 for g in case.generators}
    island_freq: dict[int, float] = {}
    shed: list[int] = []
    faults: list[str] = []

    for island, gens in sorted(members.items()):
        load = load_by_island.get(island, 0.0)
        try:
            freq, outputs = share_imbalance(
                [setpoints.get(g.id, g.p_mw) for g in gens],
                [g.droop_mw_per_unit_freq for g in gens],
                [g.p_min for g in gens],
                [g.p_max for g in gens],
                load,
            )
        except DispatchError as exc:
            shed.append(island)
            faults.append(f"island of gen {gens[0].id} shed: {exc}")
            continue
        island_freq[island] = freq
        for g, p in zip(gens, outputs):
            gen_p[g.id] = p
            slack[g.id] = p - setpoints.get(g.id, g.p_mw)

    total_load = sum(
        load_by_island.get(i, 0.0) for i in island_freq
    )
    if total_load > 0.0:
        system_freq = (
            sum(island_freq[i] * load_by_island.get(i, 0.0) for i in island_freq) / total_load
        )
    elif island_freq:
        system_freq = sum(island_freq.values()) / len(island_freq)
    else:
        system_freq = 0.0

    return DispatchSolution(
        freq_dev=system_freq,
        gen_p=gen_p,
        slack_share=slack,
        island_freq=island_freq,
        shed_islands=tuple(shed),
        faults=tuple(faults),
    )
