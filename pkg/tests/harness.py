"""Shared integration scaffolding: a simulator + outstation server on an
ephemeral port, plus master sessions wired to it, all with fast timeouts."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from gridwire.grid.case import GridCase
from gridwire.grid.sim import Simulator
from gridwire.master.session import MasterSession, SessionConfig
from gridwire.outstation.cmdlog import CommandLog
from gridwire.outstation.server import OutstationOptions, OutstationServer
from gridwire.pointmap import PointMap, autogen_map

from gridgen import random_case  # noqa: F401  (re-exported for tests)
from test_solver import br, bus, gen, simple_case


def f32(value: float) -> float:
    return struct.unpack("<f", struct.pack("<f", value))[0]


def two_gen_droop_case() -> GridCase:
    """Unit 1_1 at 1211 MW against a 2000 MW load, everything balanced."""
    return simple_case(
        [bus(1, sub=1), bus(2, load=2000.0, qload=500.0, sub=2)],
        [br(1, 2, 0.02)],
        [gen(1, 1211.0, pmax=1500.0), gen(2, 789.0, pmax=1200.0)],
    )


@dataclass
class Testbed:
    case: GridCase
    sim: Simulator
    map: PointMap
    server: OutstationServer
    sessions: list[MasterSession] = field(default_factory=list)

    @property
    def port(self) -> int:
        return self.server.port

    def session(
        self,
        outstation: int,
        *,
        poll_timeout_s: float = 2.0,
        class_poll_period_s: float = 0.2,
        integrity_poll_period_s: float = 30.0,
        max_retries: int = 3,
        client_dnp_address: int = 3,
        keep_trace: bool = False,
    ) -> MasterSession:
        config = SessionConfig(
            server_dnp_address=outstation,
            server_port=self.port,
            poll_timeout_s=poll_timeout_s,
            class_poll_period_s=class_poll_period_s,
            integrity_poll_period_s=integrity_poll_period_s,
            max_retries=max_retries,
            client_dnp_address=client_dnp_address,
        )
        session = MasterSession(config, self.map.by_number[outstation], keep_trace=keep_trace)
        self.sessions.append(session)
        return session

    def close(self) -> None:
        for session in self.sessions:
            session.close()
        self.server.stop()


def make_testbed(
    case: GridCase,
    point_map: PointMap | None = None,
    options: OutstationOptions | None = None,
    command_log: CommandLog | None = None,
    epoch_ms: int = 0,
    tick_s: float = 0.1,
) -> Testbed:
    sim = Simulator(case, tick_s=tick_s, epoch_ms=epoch_ms)
    point_map = point_map or autogen_map(case)
    server = OutstationServer(
        sim, point_map, host="127.0.0.1", port=0, options=options, command_log=command_log
    )
    server.start()
    return Testbed(case=case, sim=sim, map=point_map, server=server)
