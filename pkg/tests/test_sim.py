import logging
import math
import random

import pytest

from gridwire.errors import DeviceError
from gridwire.grid.case import load_case
from gridwire.grid.sim import Simulator

from test_solver import br, bus, gen, simple_case


def two_gen_case():
    """Two-unit droop case: unit 1_1 starts at 1211 MW, balanced system."""
    return simple_case(
        [bus(1), bus(2, load=2000.0, qload=500.0)],
        [br(1, 2, 0.02)],
        [gen(1, 1211.0, pmax=1500.0), gen(2, 789.0, pmax=1200.0)],
    )


def predicted_settle(case, commanded):
    """Droop algebra for the post-command steady state of unit 1_1."""
    gains = {g.id: g.droop_mw_per_unit_freq for g in case.generators}
    setpoints = {"1_1": commanded, "2_1": 789.0}
    load = 2000.0
    freq = (sum(setpoints.values()) - load) / sum(gains.values())
    return {gid: setpoints[gid] - gains[gid] * freq for gid in setpoints}, freq


def test_fixed_point_state_is_stable():
    sim = Simulator(two_gen_case())
    first = sim.snapshot()
    for _ in range(10):
        state = sim.tick()
    assert state.gen_p == first.gen_p
    assert state.flow_mw == first.flow_mw
    assert state.freq_dev == first.freq_dev


def test_command_ramps_along_exponential():
    case = two_gen_case()
    sim = Simulator(case)
    sim.apply_setpoint("1_1", "mw", 1000.0)
    target, freq = predicted_settle(case, 1000.0)
    start = 1211.0
    trajectory = []
    for _ in range(100):  # 10 s
        trajectory.append(sim.tick().gen_p["1_1"])
    # linear droop maps the setpoint lag through unchanged: the output is
    # settle + (start - settle) * exp(-t/tau)
    for k, got in enumerate(trajectory, start=1):
        t = k * 0.1
        expect = target["1_1"] + (start - target["1_1"]) * math.exp(-t / 5.0)
        assert got == pytest.approx(expect, rel=1e-9, abs=1e-9)


def test_output_settles_at_droop_prediction_not_command():
    case = two_gen_case()
    sim = Simulator(case)
    sim.apply_setpoint("1_1", "mw", 1000.0)
    for _ in range(400):  # 40 s >= 7 tau
        state = sim.tick()
    target, freq = predicted_settle(case, 1000.0)
    assert state.gen_p["1_1"] == pytest.approx(target["1_1"], abs=0.2)
    assert abs(state.gen_p["1_1"] - 1000.0) > 50.0  # lands off-command
    # e^-8 of the 211 MW swing is still in flight at 40 s
    assert state.freq_dev == pytest.approx(freq, rel=1e-3)


def test_energy_balance_every_tick_during_ramp():
    sim = Simulator(two_gen_case())
    sim.apply_setpoint("1_1", "mw", 1000.0)
    for _ in range(80):
        state = sim.tick()
        served = sum(state.served_load_mw.values())
        assert sum(state.gen_p.values()) == pytest.approx(served, abs=1e-6 * 100.0)


def test_ramp_distance_to_target_is_monotone():
    sim = Simulator(two_gen_case())
    sim.apply_setpoint("1_1", "mw", 1000.0)
    target, _ = predicted_settle(sim.case, 1000.0)
    last = abs(sim.snapshot().gen_p["1_1"] - target["1_1"])
    for _ in range(200):
        now = abs(sim.tick().gen_p["1_1"] - target["1_1"])
        assert now <= last + 1e-9
        last = now


def test_breaker_open_then_close_restores_flows():
    case = load_case(
        """
name: ring
buses:
  - {id: 1, substation: 1, kv: 138}
  - {id: 2, substation: 1, kv: 138, load_mw: 60}
  - {id: 3, substation: 1, kv: 138, load_mw: 40}
branches:
  - {id: "1_2_1", from: 1, to: 2, x: 0.05}
  - {id: "2_3_1", from: 2, to: 3, x: 0.04}
  - {id: "1_3_1", from: 1, to: 3, x: 0.06}
generators:
  - {id: "1_1", bus: 1, p_mw: 100, p_max: 300}
"""
    )
    sim = Simulator(case)
    before = sim.snapshot().flow_mw
    sim.apply_breaker("2_3_1", close=False)
    opened = sim.tick()
    assert opened.flow_mw["2_3_1"] == 0.0
    assert not opened.device_on("branch", "2_3_1")
    sim.apply_breaker("2_3_1", close=True)
    restored = sim.tick()
    for branch_id, value in before.items():
        assert restored.flow_mw[branch_id] == pytest.approx(value, abs=1e-9)


def test_opening_only_line_deenergizes_load_island(twobus_case):
    sim = Simulator(twobus_case)
    sim.apply_breaker("1_2_1", close=False)
    state = sim.tick()
    assert not state.energized[2]
    assert state.energized[1]
    assert state.served_load_mw[2] == 0.0
    assert state.flow_mw["1_2_1"] == 0.0
    assert state.voltage[2] == 0.0
    assert not state.device_on("bus", "2")
    # single remaining unit now carries zero load
    assert state.gen_p["1_1"] == pytest.approx(0.0)


def test_glenrose_branch_open_reads_false(glenrose_case):
    sim = Simulator(glenrose_case)
    assert sim.snapshot().device_on("branch", "5047_5260_1")
    sim.apply_breaker("5047_5260_1", close=False)
    state = sim.tick()
    assert not state.device_on("branch", "5047_5260_1")
    assert state.flow_mw["5047_5260_1"] == 0.0
    assert state.flow_mvar["5047_5260_1"] == 0.0


def test_setpoint_above_pmax_clamped_with_warning(caplog):
    sim = Simulator(two_gen_case())
    with caplog.at_level(logging.WARNING, logger="gridwire.grid.sim"):
        sim.apply_setpoint("1_1", "mw", 9999.0)
        sim.tick()
    assert any("clamped" in record.message for record in caplog.records)
    assert sim.snapshot().gen_setpoint["1_1"] == 1500.0


def test_setpoint_to_offline_gen_rejected():
    sim = Simulator(two_gen_case())
    sim.apply_gen_status("1_1", on=False)
    sim.tick()
    with pytest.raises(DeviceError, match="off-line"):
        sim.apply_setpoint("1_1", "mw", 900.0)


def test_unknown_devices_rejected():
    sim = Simulator(two_gen_case())
    with pytest.raises(DeviceError):
        sim.apply_breaker("nope", close=False)
    with pytest.raises(DeviceError):
        sim.apply_gen_status("nope", on=True)
    with pytest.raises(DeviceError):
        sim.apply_setpoint("nope", "mw", 1.0)


def test_vpu_setpoint_becomes_bus_voltage_next_tick():
    sim = Simulator(two_gen_case())
    sim.apply_setpoint("1_1", "vpu", 1.02)
    state = sim.tick()
    assert state.voltage[1] == pytest.approx(1.02)
    assert state.gen_vset["1_1"] == 1.02


def test_gen_trip_restarts_ramp_from_zero():
    case = simple_case(
        [bus(1), bus(2, load=1000.0)],
        [br(1, 2, 0.02)],
        [gen(1, 600.0, pmax=1500.0), gen(2, 400.0, pmax=1200.0)],
    )
    sim = Simulator(case)
    sim.apply_gen_status("1_1", on=False)
    state = sim.tick()
    assert state.gen_p["1_1"] == 0.0
    assert state.gen_p["2_1"] == pytest.approx(1000.0)  # droop picks up the slack
    sim.apply_gen_status("1_1", on=True)
    state = sim.tick()
    # returning unit picks up its droop share immediately but its setpoint
    # ramps from zero, so output climbs back toward 600 from below
    first = state.gen_p["1_1"]
    assert 0.0 < first < 600.0
    for _ in range(400):
        state = sim.tick()
    assert state.gen_p["1_1"] > first
    assert state.gen_p["1_1"] == pytest.approx(600.0, abs=0.5)


def test_determinism_bit_identical_trajectories():
    def run():
        sim = Simulator(two_gen_case(), epoch_ms=1_700_000_000_000)
        sim.apply_setpoint("1_1", "mw", 1000.0)
        out = []
        for k in range(120):
            if k == 40:
                sim.apply_breaker("1_2_1", close=False)
            if k == 60:
                sim.apply_breaker("1_2_1", close=True)
            state = sim.tick()
            out.append((state.gen_p["1_1"], state.flow_mw["1_2_1"], state.freq_dev))
        return out

    assert run() == run()  # exact float equality, no wall-clock leakage


def test_tick_timestamps_follow_sim_time():
    sim = Simulator(two_gen_case(), tick_s=0.1, epoch_ms=5_000)
    state = sim.tick()
    assert state.timestamp_ms == 5_100
    state = sim.tick()
    assert state.timestamp_ms == 5_200


def test_random_commands_never_abort():
    rng = random.Random(9)
    case = two_gen_case()
    sim = Simulator(case)
    for _ in range(200):
        roll = rng.random()
        if roll < 0.2:
            sim.apply_breaker("1_2_1", close=rng.random() < 0.5)
        elif roll < 0.4:
            sim.apply_gen_status(rng.choice(["1_1", "2_1"]), on=rng.random() < 0.7)
        elif roll < 0.6:
            try:
                sim.apply_setpoint(rng.choice(["1_1", "2_1"]), "mw", rng.uniform(-100, 3000))
            except DeviceError:
                pass  # target may be off-line at this roll
        state = sim.tick()
        served = sum(state.served_load_mw.values())
        assert sum(state.gen_p.values()) == pytest.approx(served, abs=1e-6 * 100.0)
