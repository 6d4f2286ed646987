"""Command-line entry points.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
Every flag can also come from the environment with a ``GW_`` prefix (e.g.
``GW_OUTSTATION_RUN_PORT``).
"""

from __future__ import annotations

import logging
import signal
import sys
import threading
from pathlib import Path

import click
import requests

from .clock import VirtualClock, WallClock
from .errors import CaseError, ConfigError, GridwireError, MapError

log = logging.getLogger(__name__)


class UsageFailure(click.ClickException):
    exit_code = 2


def _config_errors(fn):
    """Map configuration-class failures to exit code 2."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CaseError, MapError, ConfigError) as exc:
            raise UsageFailure(str(exc)) from exc
        except GridwireError as exc:
            raise click.ClickException(str(exc)) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def cli():
    """gridwire: grid simulator behind DNP3 outstations, plus the master."""
    logging.basicConfig(
        level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


@cli.group()
def outstation():
    """Simulation server commands."""


@outstation.command("run")
@click.option("--case", "case_path", required=True, type=click.Path(exists=True))
@click.option("--map", "map_path", required=True, type=click.Path(exists=True))
@click.option("--bind", default="127.0.0.1", show_default=True)
@click.option("--port", default=20000, show_default=True, type=int)
@click.option("--tick-ms", default=100, show_default=True, type=int)
@click.option("--command-log", "command_log_path", type=click.Path(), default=None,
              help="Append executed controls as JSON lines here.")
@click.option("--tick-virtual", is_flag=True,
              help="Advance simulated time as fast as possible (CI/replay).")
@_config_errors
def outstation_run(case_path, map_path, bind, port, tick_ms, command_log_path, tick_virtual):
    """Run the real-time simulation and serve its outstations over TCP."""
    from .grid.case import load_case_file
    from .grid.sim import Simulator
    from .outstation.cmdlog import CommandLog
    from .outstation.server import OutstationServer
    from .pointmap import parse_map_file

    case = load_case_file(case_path)
    point_map = parse_map_file(map_path, case)
    sim = Simulator(case, tick_s=tick_ms / 1000.0)
    command_log = CommandLog(command_log_path)
    server = OutstationServer(sim, point_map, host=bind, port=port, command_log=command_log)
    try:
        server.start()
    except OSError as exc:
        raise click.ClickException(f"cannot bind {bind}:{port}: {exc}") from exc
    click.echo(f"listening on {bind}:{server.port} "
               f"({len(point_map.outstations)} outstations)", nl=True)
    sys.stdout.flush()
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    clock = VirtualClock() if tick_virtual else WallClock()
    try:
        sim.run(clock, stop)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        click.echo("command log flushed, shutting down")
    return 0


@cli.group()
def master():
    """DNP3 master commands."""


@master.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--api", "api_addr", default="127.0.0.1:8080", show_default=True,
              help="HOST:PORT for the operator HTTP API.")
@click.option("--command-log", "command_log_path", type=click.Path(), default=None,
              help="Outstation JSON-lines command log to expose under /api/logs.")
@click.option("--console", "console_dir", type=click.Path(), default=None,
              help="Built operator console to serve under /ui/.")
@_config_errors
def master_run(config_path, api_addr, command_log_path, console_dir):
    """Run the polling sessions and the operator API."""
    import uvicorn

    from .api import create_app
    from .master.master import Master, MasterConfig

    config = MasterConfig.load(config_path)
    if not config.sessions:
        click.echo("warning: no sessions configured; serving an empty API", err=True)
    manager = Master.from_config(config)
    manager.start()
    app = create_app(manager, command_log_path=command_log_path, console_dir=console_dir)
    host, _, port = api_addr.partition(":")
    try:
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    finally:
        manager.stop()
    return 0


def _api_get(api: str, path: str, **params):
    try:
        response = requests.get(f"http://{api}{path}", params=params, timeout=10)
    except requests.RequestException as exc:
        raise click.ClickException(f"API unreachable: {exc}") from exc
    return response


@master.command("read")
@click.option("--tag", required=True)
@click.option("--api", "api_addr", default="127.0.0.1:8080", show_default=True)
def master_read(tag, api_addr):
    """Print one tag's current value from a running master."""
    response = _api_get(api_addr, "/api/tags", tag=tag)
    if response.status_code != 200:
        raise click.ClickException(f"API error {response.status_code}: {response.text}")
    rows = response.json()
    if not rows:
        raise UsageFailure(f"unknown tag '{tag}'")
    row = rows[0]
    click.echo(
        f"{row['name']} instMag={row['instMag']} mag={row['mag']} "
        f"validity={row['validity']}"
    )


@master.command("operate")
@click.option("--tag", required=True)
@click.option("--on", "latch", flag_value="latch_on")
@click.option("--off", "latch", flag_value="latch_off")
@click.option("--value", type=float, default=None)
@click.option("--select-operate", is_flag=True)
@click.option("--api", "api_addr", default="127.0.0.1:8080", show_default=True)
def master_operate(tag, latch, value, select_operate, api_addr):
    """Issue a control through a running master."""
    if latch and value is not None:
        raise UsageFailure("choose either --on/--off or --value, not both")
    if not latch and value is None:
        raise UsageFailure("one of --on, --off or --value is required")
    body = {
        "tag": tag,
        "action": latch or "analog",
        "value": value,
        "mode": "select_operate" if select_operate else "direct",
    }
    try:
        response = requests.post(f"http://{api_addr}/api/control", json=body, timeout=30)
    except requests.RequestException as exc:
        raise click.ClickException(f"API unreachable: {exc}") from exc
    if response.status_code == 400:
        raise UsageFailure(response.json().get("detail", response.text))
    if response.status_code != 200:
        raise click.ClickException(f"API error {response.status_code}: {response.text}")
    status = response.json()["status"]
    click.echo(status)
    if status != "SUCCESS":
        sys.exit(1)


@cli.command("mapgen")
@click.option("--case", "case_path", required=True, type=click.Path(exists=True))
@click.option("-o", "--out", "out_path", default="-", show_default=True,
              help="Output map file, '-' for stdout.")
@_config_errors
def mapgen(case_path, out_path):
    """Generate a point map from a case: one outstation per substation."""
    from .grid.case import load_case_file
    from .pointmap import autogen_map, dump_map

    case = load_case_file(case_path)
    text = dump_map(autogen_map(case))
    if out_path == "-":
        click.echo(text, nl=False)
    else:
        Path(out_path).write_text(text)
        click.echo(f"wrote {out_path}")


@cli.command("framedump")
@click.argument("capture", type=click.Path(exists=True), required=False)
@click.option("--pcapish", "pcapish", type=click.Path(exists=True), default=None,
              help="Capture file of raw concatenated frames (alias for the argument).")
def framedump(capture, pcapish):
    """Render a captured raw DNP3 byte stream, one line per frame."""
    from .dnp3.render import FrameDumper

    path = capture or pcapish
    if path is None:
        raise UsageFailure("provide a capture file (argument or --pcapish)")
    dumper = FrameDumper()
    for line in dumper.feed(Path(path).read_bytes()):
        click.echo(line)


def main():
    cli(auto_envvar_prefix="GW")


if __name__ == "__main__":
    main()
