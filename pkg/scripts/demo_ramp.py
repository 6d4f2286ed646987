#!/usr/bin/env python3
"""Replay the setpoint exemplar in-process and print the ramp.

Loads the bundled substation case, serves it as outstation 560 on an
ephemeral port, polls it with a master session, commands the big unit from
1211 MW down to 1000 MW, and tabulates what the master's tag sees while the
unit settles at its droop-dispatched value (above the command, because the
rest of the system is now short).
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from gridwire.grid.case import load_case_file
from gridwire.grid.sim import Simulator
from gridwire.master.session import MasterSession, SessionConfig
from gridwire.outstation.server import OutstationServer
from gridwire.pointmap import autogen_map

CASE = pathlib.Path(__file__).resolve().parent.parent / "cases" / "glenrose.yaml"


def main():
    case = load_case_file(CASE)
    sim = Simulator(case, tick_s=0.1)
    point_map = autogen_map(case)
    server = OutstationServer(sim, point_map, host="127.0.0.1", port=0)
    server.start()
    session = MasterSession(
        SessionConfig(server_dnp_address=560, server_port=server.port,
                      poll_timeout_s=2.0),
        point_map.by_number[560],
    )
    try:
        session.poll_integrity()
        mw = session.tags["AI_560_Generator_5262_1_MW"]
        print(f"unit 5262_1 at {mw.inst_mag:.1f} MW; commanding 1000 MW")
        status = session.operate_analog("AO_560_Generator_5262_1_MWSETPOINT", 1000.0)
        print(f"command status: {status.name}")
        print(f"{'sim time':>9}  {'instMag MW':>10}  {'mag MW':>8}")
        for cycle in range(18):
            for _ in range(20):  # 2 s of simulation per poll cycle
                sim.tick()
            session.poll_classes()
            session.poll_integrity()
            state = sim.snapshot()
            mag = f"{mw.mag:.0f}" if mw.mag is not None else "-"
            print(f"{state.time_s:9.1f}  {mw.inst_mag:10.1f}  {mag:>8}")
        print(f"settled near {mw.inst_mag:.1f} MW (command was 1000.0 MW)")
        print(f"system frequency deviation: {sim.snapshot().freq_dev:+.5f} pu")
        for entry in server.command_log.entries():
            print(f"log: {entry.tag} {entry.command} x{entry.count} -> {entry.outcome}")
    finally:
        session.close()
        server.stop()


if __name__ == "__main__":
    main()
