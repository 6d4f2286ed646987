"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
(run with ``pytest tests/test_acceptance.py -v -s`` to watch them go by).

Every expected number here comes from an independent oracle in
``oracles.py`` (bit-serial CRC, dense Gaussian elimination, closed-form
droop algebra) or is pinned by construction of the scenario.
"""

import math
import random
import threading
import time
from contextlib import contextmanager

import pytest

from gridwire.dnp3.app import (
    AnalogCommand,
    AnalogPoint,
    AppControl,
    AppFragment,
    BinaryPoint,
    CommandStatus,
    CounterPoint,
    Crob,
    FunctionCode,
    Iin,
    ObjectBlock,
    Qualifier,
    decode_app_fragment,
    encode_app_fragment,
)
from gridwire.dnp3.crc import crc_dnp
from gridwire.dnp3.link import (
    CONTROL_FROM_MASTER,
    CONTROL_FROM_OUTSTATION,
    LinkFrame,
    decode_link_frame,
    encode_link_frame,
)
from gridwire.dnp3.transport import TransportReassembler, TransportSegment, transport_segment
from gridwire.errors import DispatchError, FrameError, GridwireError
from gridwire.grid.dispatch import droop_dispatch
from gridwire.grid.sim import Simulator
from gridwire.grid.solver import Topology, solve_dc
from gridwire.outstation.events import AnalogReportState
from gridwire.outstation.server import OutstationServer

from gridgen import random_case
from harness import f32, make_testbed, two_gen_droop_case
from oracles import crc_bitserial, dc_flows_dense, droop_outputs
from test_solver import br, bus, gen, simple_case


@contextmanager
def criterion(num, text, budget_s=None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"\n[FAIL] criterion {num}: {text}")
        raise
    elapsed = time.perf_counter() - start
    print(f"\n[PASS] criterion {num}: {text} ({elapsed:.2f}s)")
    if budget_s is not None:
        assert elapsed < budget_s, f"criterion {num} overran its {budget_s}s budget"


def test_criterion_1_exemplar_setpoint_ramp():
    with criterion(1, "setpoint command ramps and settles per droop algebra", 5.0):
        bed = make_testbed(two_gen_droop_case(), epoch_ms=0, tick_s=0.1)
        try:
            session = bed.session(1, integrity_poll_period_s=60.0, poll_timeout_s=2.0)
            assert session.poll_integrity()
            assert session.tags["AI_1_Generator_1_1_MW"].inst_mag == pytest.approx(1211.0)

            status = session.operate_analog("AO_1_Generator_1_1_MWSETPOINT", 1000.0)
            assert status == CommandStatus.SUCCESS  # (a)

            samples = []
            for _cycle in range(6):  # 6 poll cycles of 2 simulated seconds
                for _ in range(20):
                    bed.sim.tick()
                assert session.poll_classes()
                assert session.poll_integrity()
                samples.append(session.tags["AI_1_Generator_1_1_MW"].inst_mag)
            assert all(a > b for a, b in zip(samples, samples[1:])), samples  # (b)

            # independent droop algebra for the settled point
            case = bed.case
            freq, outputs = droop_outputs(
                [1000.0, 789.0],
                [g.droop_mw_per_unit_freq for g in case.generators],
                [g.p_min for g in case.generators],
                [g.p_max for g in case.generators],
                2000.0,
            )
            predicted = outputs[0]

            while bed.sim.snapshot().time_s < 7 * 5.0:  # 7 time constants
                bed.sim.tick()
            assert session.poll_integrity()
            settled = session.tags["AI_1_Generator_1_1_MW"].inst_mag
            assert abs(settled - predicted) < 0.5  # (c)
            assert abs(settled - 1000.0) > 1.0  # (d): lands off-command
            assert freq != 0.0
        finally:
            bed.close()


def test_criterion_2_breaker_scenario():
    with criterion(2, "breaker latch-off: feedback, single event, command log", 2.0):
        bed = make_testbed(two_gen_droop_case(), epoch_ms=0, tick_s=0.1)
        try:
            session = bed.session(1, client_dnp_address=11, keep_trace=True)
            assert session.poll_integrity()
            log_before = len(bed.server.command_log.entries())

            status = session.operate_binary("BO_1_Branch_1_2_1_STATUS", latch_on=False)
            assert status == CommandStatus.SUCCESS
            bed.sim.tick()  # one tick
            assert session.poll_classes()  # one class poll

            assert session.tags["BI_1_Branch_1_2_1_STATUS"].inst_mag is False
            assert session.tags["AI_1_Branch_1_2_1_MW"].inst_mag == 0.0
            assert session.tags["AI_1_Branch_1_2_1_MVAR"].inst_mag == 0.0

            binary_events = [
                v for _, frag in session.trace if frag.function == FunctionCode.RESPONSE
                for b in frag.objects if b.group == 2 for v in b.values
            ]
            assert len(binary_events) == 1
            assert binary_events[0].state is False
            # confirm-then-drain: a second poll redelivers nothing
            session.trace.clear()
            assert session.poll_classes()
            redelivered = [
                v for _, frag in session.trace if frag.function == FunctionCode.RESPONSE
                for b in frag.objects if b.group == 2 for v in b.values
            ]
            assert redelivered == []

            entries = bed.server.command_log.entries()
            assert len(entries) == log_before + 1
            assert entries[0].source_address == 11
            assert entries[0].tag == "BO_1_Branch_1_2_1_STATUS"
            assert entries[0].command == "open"
        finally:
            bed.close()


def _random_link_frame(rng):
    return LinkFrame(
        destination=rng.randrange(65520),
        source=rng.randrange(65520),
        control=rng.choice([CONTROL_FROM_MASTER, CONTROL_FROM_OUTSTATION]),
        user_data=bytes(rng.randrange(256) for _ in range(rng.randrange(251))),
    )


def _random_fragment(rng):
    kind = rng.randrange(5)
    seq = rng.randrange(16)
    if kind == 0:  # class poll request
        return AppFragment(
            AppControl(sequence=seq), FunctionCode.READ,
            objects=tuple(
                ObjectBlock(60, v, Qualifier.ALL_OBJECTS)
                for v in rng.sample([1, 2, 3, 4], rng.randrange(1, 5))
            ),
        )
    if kind == 1:  # static response over every static group
        blocks = []
        start = rng.randrange(200)
        n = rng.randrange(1, 9)
        group, variation = rng.choice([(1, 2), (10, 2), (30, 5), (30, 1), (40, 1), (20, 1)])
        values = []
        for _ in range(n):
            if group in (1, 10):
                values.append(BinaryPoint(state=rng.random() < 0.5, flags=rng.randrange(128)))
            elif group == 20:
                values.append(CounterPoint(value=rng.randrange(2**32), flags=rng.randrange(256)))
            elif (group, variation) == (30, 5):
                values.append(AnalogPoint(value=f32(rng.uniform(-1e6, 1e6)),
                                          flags=rng.randrange(256)))
            else:
                values.append(AnalogPoint(value=float(rng.randrange(-2**31, 2**31)),
                                          flags=rng.randrange(256)))
        q = Qualifier.START_STOP_1 if start + n - 1 < 256 else Qualifier.START_STOP_2
        blocks.append(ObjectBlock(group, variation, q, start=start, stop=start + n - 1,
                                  values=tuple(values)))
        return AppFragment(
            AppControl(sequence=seq, con=rng.random() < 0.3), FunctionCode.RESPONSE,
            iin=Iin(rng.randrange(0x4000)), objects=tuple(blocks),
        )
    if kind == 2:  # event response
        group, variation = rng.choice([(2, 2), (32, 3)])
        n = rng.randrange(1, 6)
        indices = tuple(rng.sample(range(500), n))
        values = []
        for _ in range(n):
            ts = rng.randrange(2**47)
            if group == 2:
                values.append(BinaryPoint(state=rng.random() < 0.5,
                                          flags=rng.randrange(128), timestamp_ms=ts))
            else:
                values.append(AnalogPoint(value=float(rng.randrange(-2**31, 2**31)),
                                          flags=rng.randrange(256), timestamp_ms=ts))
        return AppFragment(
            AppControl(sequence=seq, con=True), FunctionCode.RESPONSE,
            iin=Iin(rng.randrange(0x4000)),
            objects=(ObjectBlock(group, variation, Qualifier.COUNT_2_INDEX_2,
                                 indices=indices, values=tuple(values)),),
        )
    if kind == 3:  # CROB command
        return AppFragment(
            AppControl(sequence=seq),
            rng.choice([FunctionCode.SELECT, FunctionCode.OPERATE,
                        FunctionCode.DIRECT_OPERATE]),
            objects=(ObjectBlock(
                12, 1, Qualifier.COUNT_1_INDEX_1,
                indices=(rng.randrange(256),),
                values=(Crob(code=rng.choice([1, 2, 3, 4, 0x41, 0x81]),
                             count=rng.randrange(256),
                             on_time_ms=rng.randrange(2**32),
                             off_time_ms=rng.randrange(2**32),
                             status=rng.randrange(20)),),
            ),),
        )
    return AppFragment(  # analog output command
        AppControl(sequence=seq), FunctionCode.DIRECT_OPERATE,
        objects=(ObjectBlock(
            41, 3, Qualifier.COUNT_2_INDEX_2,
            indices=(rng.randrange(65536),),
            values=(AnalogCommand(value=f32(rng.uniform(-1e5, 1e5)),
                                  status=rng.randrange(20)),),
        ),),
    )


def test_criterion_3_wire_conformance():
    with criterion(3, "codec round-trips, CRC oracle agreement, decoder fuzz", 60.0):
        rng = random.Random(0xC0DE)
        # >= 10^4 round-trips across frames and all supported variations
        for _ in range(4_000):
            frame = _random_link_frame(rng)
            decoded, consumed = decode_link_frame(encode_link_frame(frame))
            assert decoded == frame
        for _ in range(6_000):
            fragment = _random_fragment(rng)
            assert decode_app_fragment(encode_app_fragment(fragment)) == fragment
        # transport round-trips ride along
        for _ in range(500):
            blob = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 3000)))
            reassembler = TransportReassembler(max_fragment=4096)
            out = None
            for seg in transport_segment(blob, rng.randrange(64)):
                out = reassembler.feed(seg)
            assert out == blob

        # CRC: table against the bit-serial oracle
        for _ in range(10_000):
            block = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 19)))
            assert crc_dnp(block) == crc_bitserial(block)

        # >= 10^5 fuzz decodes with zero crashes
        for _ in range(50_000):
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 40)))
            try:
                decode_link_frame(data)
            except FrameError:
                pass
        for _ in range(30_000):
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 30)))
            try:
                decode_app_fragment(data)
            except GridwireError:
                pass
        reassembler = TransportReassembler()
        for _ in range(20_000):
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 40)))
            try:
                reassembler.feed(TransportSegment.decode(data))
            except GridwireError:
                pass


def test_criterion_4_power_flow_oracle():
    with criterion(4, "KCL + dense-solve agreement on 25 random cases", 30.0):
        rng = random.Random(0x6060)
        for trial in range(25):
            case = random_case(
                rng, rng.randrange(4, 51), extra_edges=rng.randrange(0, 6),
                tight_limits=trial % 2 == 1,
            )
            topo = Topology.from_case(case)
            solution = droop_dispatch(case, topo, {g.id: g.p_mw for g in case.generators})
            assert not solution.shed_islands
            total_load = sum(b.load_mw for b in case.buses)
            assert abs(sum(solution.gen_p.values()) - total_load) <= 1e-6 * case.base_mva
            for g in case.generators:
                assert g.p_min - 1e-9 <= solution.gen_p[g.id] <= g.p_max + 1e-9

            angles, flows, faults = solve_dc(case, topo, solution.gen_p)
            assert faults == []

            # per-bus KCL residual in per-unit
            net = {b.id: 0.0 for b in case.buses}
            for g in case.generators:
                net[g.bus] += solution.gen_p[g.id]
            for b in case.buses:
                net[b.id] -= b.load_mw
            for branch in case.branches:
                net[branch.from_bus] -= flows[branch.id]
                net[branch.to_bus] += flows[branch.id]
            for bus_id, residual in net.items():
                assert abs(residual) / case.base_mva <= 1e-9

            # flows against the dense Gaussian-elimination oracle
            pos = {b.id: i for i, b in enumerate(case.buses)}
            edges = [(pos[b.from_bus], pos[b.to_bus], b.x) for b in case.branches]
            injections = [net_injection(case, solution.gen_p, b.id) for b in case.buses]
            _, oracle_flows = dc_flows_dense(len(case.buses), edges, injections, 0)
            for branch, oracle_pu in zip(case.branches, oracle_flows):
                mine = flows[branch.id]
                assert math.isclose(
                    mine, oracle_pu * case.base_mva, rel_tol=1e-9, abs_tol=1e-9
                ), branch.id

        # saturation cases: shrink the biggest unit's limit below its share
        from dataclasses import replace

        saturated = 0
        for trial in range(5):
            case = random_case(rng, 12, n_gens=3)
            topo = Topology.from_case(case)
            free = droop_dispatch(case, topo, {g.id: g.p_mw for g in case.generators})
            biggest = max(case.generators, key=lambda g: free.gen_p[g.id])
            cap = free.gen_p[biggest.id] * 0.8
            squeezed = replace(
                biggest, p_max=cap, p_mw=min(biggest.p_mw, cap),
                droop_mw_per_unit_freq=20 * cap,
            )
            case = replace(
                case,
                generators=tuple(
                    squeezed if g.id == biggest.id else g for g in case.generators
                ),
            )
            solution = droop_dispatch(
                case, Topology.from_case(case), {g.id: g.p_mw for g in case.generators}
            )
            if solution.shed_islands:
                continue
            total_load = sum(b.load_mw for b in case.buses)
            assert abs(sum(solution.gen_p.values()) - total_load) <= 1e-6 * case.base_mva
            assert solution.gen_p[biggest.id] <= cap + 1e-9
            if abs(solution.gen_p[biggest.id] - cap) < 1e-9:
                saturated += 1
        assert saturated > 0


def net_injection(case, gen_p, bus_id):
    total = 0.0
    for g in case.generators:
        if g.bus == bus_id:
            total += gen_p[g.id]
    total -= case.bus_by_id[bus_id].load_mw
    return total / case.base_mva


def test_criterion_5_deadband_semantics():
    with criterion(5, "analog events fire exactly on deadband crossings"):
        # the reported/live pair sits 11 apart: quiet at deadband >= 11
        state = AnalogReportState(inst_mag=1015.0, mag=1015.0, deadband=11.0)
        assert state.scan(1004.0) is False and state.mag == 1015.0
        state = AnalogReportState(inst_mag=1015.0, mag=1015.0, deadband=10.5)
        assert state.scan(1004.0) is True and state.mag == 1004.0

        rng = random.Random(5)
        for _ in range(500):
            deadband = rng.choice([0.0, 0.5, 2.0, 11.0, 40.0])
            state = AnalogReportState(inst_mag=0.0, mag=0.0, deadband=deadband)
            reported = 0.0
            last_emitted = None
            value = 0.0
            for _ in range(80):
                value += rng.uniform(-10, 10)
                expect = abs(value - reported) > deadband
                fired = state.scan(value)
                assert fired == expect
                if fired:
                    reported = value
                    last_emitted = value
                assert state.mag == reported
                assert state.inst_mag == value
                if last_emitted is not None:
                    assert state.mag == last_emitted


def test_criterion_6_health_semantics():
    with criterion(6, "offline after exactly max_retries, recovery in one integrity poll"):
        bed = make_testbed(two_gen_droop_case())
        port = bed.port
        session = bed.session(1, poll_timeout_s=0.3, max_retries=3)
        assert session.poll_integrity()
        assert not session.health.offline
        assert all(session.tag_valid(e) for e in session.tags.values())

        bed.server.stop()  # killed mid-run
        for attempt in range(1, 4):
            assert not session.poll_integrity()
            assert session.health.offline == (attempt >= 3), f"attempt {attempt}"
        assert all(not session.tag_valid(e) for e in session.tags.values())
        health = session.health
        assert health.message_success_count + health.message_failure_count \
            <= health.message_sent_count

        # restart on the same port: one integrity poll recovers everything
        server2 = OutstationServer(bed.sim, bed.map, host="127.0.0.1", port=port)
        server2.start()
        try:
            assert session.poll_integrity()
            assert not session.health.offline
            assert all(session.tag_valid(e) for e in session.tags.values())
        finally:
            session.close()
            server2.stop()


def _three_station_case():
    return simple_case(
        [
            bus(1, sub=1), bus(2, load=300.0, qload=90.0, sub=1),
            bus(3, sub=2), bus(4, load=400.0, qload=120.0, sub=2),
            bus(5, sub=3), bus(6, load=200.0, qload=60.0, sub=3),
        ],
        [
            br(1, 2, 0.02), br(3, 4, 0.02), br(5, 6, 0.02),
            br(2, 4, 0.04), br(4, 6, 0.04), br(6, 2, 0.04),
        ],
        [gen(1, 350.0, pmax=700.0), gen(3, 400.0, pmax=800.0), gen(5, 150.0, pmax=500.0)],
    )


def test_criterion_7_multiplexing_three_outstations():
    with criterion(7, "three concurrent sessions on one server, zero cross-talk"):
        bed = make_testbed(_three_station_case())
        try:
            stations = sorted(bed.map.by_number)
            assert stations == [1, 2, 3]
            # point sets are disjoint by tag name and by (outstation, type, index)
            all_tags: set[str] = set()
            for number in stations:
                station = bed.map.by_number[number]
                names = {f"{p.point_type.value}:{number}:{p.index}" for p in station.points}
                tags = {t for t, (s, _) in bed.map.tags.items() if s.number == number}
                assert not (all_tags & tags)
                all_tags |= tags
                assert len(names) == len(station.points)

            sessions = {
                number: bed.session(number, client_dnp_address=20 + number)
                for number in stations
            }
            stop = threading.Event()

            def ticker():
                while not stop.is_set():
                    bed.sim.tick()
                    time.sleep(0.005)

            errors: list[str] = []

            def worker(number):
                session = sessions[number]
                try:
                    if not session.poll_integrity():
                        errors.append(f"{number}: integrity failed")
                        return
                    gen_id = {1: "1_1", 2: "3_1", 3: "5_1"}[number]
                    status = session.operate_analog(
                        f"AO_{number}_Generator_{gen_id}_MWSETPOINT", 100.0 * number
                    )
                    if status != CommandStatus.SUCCESS:
                        errors.append(f"{number}: operate {status}")
                    for _ in range(5):
                        if not session.poll_classes():
                            errors.append(f"{number}: class poll failed")
                        time.sleep(0.02)
                    if not session.poll_integrity():
                        errors.append(f"{number}: final integrity failed")
                except Exception as exc:  # noqa: BLE001 - surface everything
                    errors.append(f"{number}: {exc!r}")

            tick_thread = threading.Thread(target=ticker, daemon=True)
            tick_thread.start()
            workers = [threading.Thread(target=worker, args=(n,)) for n in stations]
            for w in workers:
                w.start()
            for w in workers:
                w.join(timeout=20.0)
            stop.set()
            tick_thread.join(timeout=2.0)
            assert errors == []

            snap = bed.sim.snapshot()
            for number in stations:
                session = sessions[number]
                health = session.health
                assert not health.offline
                assert health.message_success_count + health.message_failure_count \
                    <= health.message_sent_count
                # every tag this session holds belongs to its own outstation
                for entry in session.tags.values():
                    assert entry.outstation == number
                    assert entry.inst_mag is not None
                gen_id = {1: "1_1", 2: "3_1", 3: "5_1"}[number]
                assert snap.gen_setpoint[gen_id] == 100.0 * number
            # command log attributes each control to the right outstation/client
            entries = bed.server.command_log.entries()
            assert {(e.outstation, e.source_address) for e in entries} == {
                (1, 21), (2, 22), (3, 23)
            }
        finally:
            bed.close()
