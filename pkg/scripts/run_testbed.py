#!/usr/bin/env python3
"""Spin up the whole testbed in one process for interactive poking:
simulator + outstation server on :20000, master sessions, and the operator
API (plus console, if built) on :8080.

    python scripts/run_testbed.py [--case cases/glenrose.yaml] [--api-port 8080]

Then e.g.:

    curl -s localhost:8080/api/sessions | python -m json.tool
    gridwire master operate --tag AO_560_Generator_5262_1_MWSETPOINT --value 1000
    curl -Ns 'localhost:8080/api/stream?idle_s=10'
"""

import argparse
import pathlib
import sys
import threading

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import uvicorn

from gridwire.api import create_app
from gridwire.clock import WallClock
from gridwire.grid.case import load_case_file
from gridwire.grid.sim import Simulator
from gridwire.master.master import Master
from gridwire.master.session import SessionConfig
from gridwire.outstation.cmdlog import CommandLog
from gridwire.outstation.server import OutstationServer
from gridwire.pointmap import autogen_map

ROOT = pathlib.Path(__file__).resolve().parent.parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--case", default=str(ROOT / "cases" / "glenrose.yaml"))
    parser.add_argument("--port", type=int, default=20000, help="DNP3 TCP port")
    parser.add_argument("--api-port", type=int, default=8080)
    parser.add_argument("--tick-ms", type=int, default=100)
    args = parser.parse_args()

    case = load_case_file(args.case)
    point_map = autogen_map(case)
    sim = Simulator(case, tick_s=args.tick_ms / 1000.0)
    command_log = CommandLog(ROOT / "commands.jsonl")
    server = OutstationServer(sim, point_map, host="127.0.0.1", port=args.port,
                              command_log=command_log)
    server.start()

    sessions = [
        SessionConfig(server_dnp_address=station.number, server_port=server.port,
                      class_poll_period_s=1.0, integrity_poll_period_s=30.0,
                      poll_timeout_s=3.0)
        for station in point_map.outstations
    ]
    master = Master(point_map, sessions)
    master.start()

    stop = threading.Event()
    ticker = threading.Thread(
        target=sim.run, args=(WallClock(), stop), name="sim-ticker", daemon=True
    )
    ticker.start()

    console = ROOT / "frontend" / "dist"
    app = create_app(master, command_log=command_log,
                     console_dir=console if console.is_dir() else None)
    print(f"DNP3 on 127.0.0.1:{server.port}; API on 127.0.0.1:{args.api_port}"
          + (f"; console at http://127.0.0.1:{args.api_port}/ui/" if console.is_dir() else ""))
    try:
        uvicorn.run(app, host="127.0.0.1", port=args.api_port, log_level="warning")
    finally:
        stop.set()
        master.stop()
        server.stop()


if __name__ == "__main__":
    main()
