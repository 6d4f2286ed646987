"""Quasi-steady-state grid simulation: cases, linear solves, droop dispatch,
and the ticking simulator."""

from .case import Branch, Bus, Generator, GridCase, dump_case, load_case, load_case_file
from .dispatch import DispatchSolution, droop_dispatch, ramp_toward, share_imbalance
from .sim import GridState, Simulator
from .solver import IslandMap, Topology, analyze_islands, solve_dc, solve_qv
