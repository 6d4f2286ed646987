"""The master process: many sessions, a shared tag view, delta listeners
for the push channel, and the control entry point used by the HTTP API."""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..dnp3.app import CommandStatus
from ..errors import ConfigError, MapError
from ..pointmap import PointMap, parse_map_file
from .session import MasterSession, SessionConfig, TagEntry

log = logging.getLogger(__name__)

RECONNECT_BACKOFF_CAP_S = 30.0


@dataclass
class MasterConfig:
    map_path: str
    sessions: list[SessionConfig] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path) -> "MasterConfig":
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"master config is not valid YAML: {exc}") from exc
        if not isinstance(doc, dict) or "map" not in doc:
            raise ConfigError("master config must be a mapping with a 'map' path")
        sessions = []
        names = set()
        for raw in doc.get("sessions", []):
            try:
                config = SessionConfig(
                    server_dnp_address=int(raw["outstation"]),
                    name=str(raw.get("name", "")),
                    server_ip=str(raw.get("server_ip", "127.0.0.1")),
                    server_port=int(raw.get("server_port", 20000)),
                    client_dnp_address=int(raw.get("client_dnp_address", 3)),
                    integrity_poll_period_s=float(raw.get("integrity_poll_period_s", 60.0)),
                    class_poll_period_s=float(raw.get("class_poll_period_s", 2.0)),
                    poll_timeout_s=float(raw.get("poll_timeout_s", 5.0)),
                    max_retries=int(raw.get("max_retries", 3)),
                )
            except KeyError as exc:
                raise ConfigError(f"session record missing {exc}") from exc
            if config.name in names:
                raise ConfigError(f"duplicate session name '{config.name}'")
            names.add(config.name)
            sessions.append(config)
        map_path = Path(doc["map"])
        if not map_path.is_absolute():
            map_path = path.parent / map_path
        return cls(map_path=str(map_path), sessions=sessions)


@dataclass(frozen=True)
class TagView:
    """JSON-ready view of one tag."""

    name: str
    inst_mag: float | bool | None
    mag: float | bool | None
    validity: str
    timestamp_ms: int | None
    outstation: int
    point_type: str
    index: int
    unit: str

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "instMag": self.inst_mag,
            "mag": self.mag,
            "validity": self.validity,
            "timestamp": self.timestamp_ms,
            "point": {
                "outstation": self.outstation,
                "type": self.point_type,
                "index": self.index,
            },
            "unit": self.unit,
        }


class Master:
    def __init__(self, point_map: PointMap, sessions: list[SessionConfig],
                 keep_trace: bool = False):
        self.map = point_map
        self.sessions: dict[str, MasterSession] = {}
        for config in sessions:
            station = point_map.by_number.get(config.server_dnp_address)
            if station is None:
                raise ConfigError(
                    f"session {config.name}: outstation {config.server_dnp_address} "
                    f"not in the point map"
                )
            if config.name in self.sessions:
                raise ConfigError(f"duplicate session name '{config.name}'")
            self.sessions[config.name] = MasterSession(config, station, keep_trace=keep_trace)
        self._listeners: list = []
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()
        self.events: deque[dict] = deque(maxlen=500)

    @classmethod
    def from_config(cls, config: MasterConfig, keep_trace: bool = False) -> "Master":
        point_map = parse_map_file(config.map_path)
        return cls(point_map, config.sessions, keep_trace=keep_trace)

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        for session in self.sessions.values():
            thread = threading.Thread(
                target=self._run_session, args=(session,),
                name=f"session-{session.config.name}", daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        for session in self.sessions.values():
            session.prompt_poll.set()  # wake schedulers
        for thread in self._threads:
            thread.join(timeout=3.0)
        for session in self.sessions.values():
            session.close()
        self._threads.clear()

    def _run_session(self, session: MasterSession) -> None:
        config = session.config
        next_integrity = 0.0  # immediately on start
        next_class = time.monotonic() + config.class_poll_period_s
        backoff = config.poll_timeout_s
        while not self._stop.is_set():
            now = time.monotonic()
            try:
                did_poll = False
                if now >= next_integrity:
                    ok = session.poll_integrity()
                    did_poll = True
                    next_integrity = time.monotonic() + (
                        config.integrity_poll_period_s if ok else min(backoff, 5.0)
                    )
                    if ok:
                        self._note(session, "integrity poll ok")
                elif session.prompt_poll.is_set() or now >= next_class:
                    session.prompt_poll.clear()
                    ok = session.poll_classes()
                    did_poll = True
                    next_class = time.monotonic() + config.class_poll_period_s
                if did_poll:
                    self._publish(session)
                if session.health.offline:
                    # reconnect cadence backs off up to the cap
                    self._stop.wait(min(backoff, RECONNECT_BACKOFF_CAP_S))
                    backoff = min(backoff * 2, RECONNECT_BACKOFF_CAP_S)
                    next_integrity = 0.0
                else:
                    backoff = config.poll_timeout_s
                    wake = min(next_integrity, next_class)
                    delay = max(0.01, min(wake - time.monotonic(), 0.25))
                    if session.prompt_poll.is_set():
                        delay = 0.01
                    self._stop.wait(delay)
            except Exception:
                log.exception("session %s scheduler error", config.name)
                self._stop.wait(1.0)

    # -- views -----------------------------------------------------------

    def session(self, name: str) -> MasterSession:
        try:
            return self.sessions[name]
        except KeyError:
            raise ConfigError(f"unknown session '{name}'") from None

    def view(self, session: MasterSession, entry: TagEntry) -> TagView:
        return TagView(
            name=entry.name,
            inst_mag=entry.inst_mag,
            mag=entry.mag,
            validity="good" if session.tag_valid(entry) else "invalid",
            timestamp_ms=entry.timestamp_ms,
            outstation=entry.outstation,
            point_type=entry.point.point_type.value,
            index=entry.point.index,
            unit=entry.unit,
        )

    def tag_views(self, session_name: str, prefix: str = "") -> list[TagView]:
        session = self.session(session_name)
        return [
            self.view(session, entry)
            for name, entry in sorted(session.tags.items())
            if name.startswith(prefix)
        ]

    def find_tag(self, tag: str) -> tuple[MasterSession, TagEntry]:
        for session in self.sessions.values():
            entry = session.tags.get(tag)
            if entry is not None:
                return session, entry
        raise MapError(f"unknown tag '{tag}'")

    def export_tags(self) -> str:
        doc = {
            name: [self.view(s, e).to_json() for e in s.tags.values()]
            for name, s in self.sessions.items()
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    # -- controls ----------------------------------------------------------

    def operate_tag(
        self, tag: str, action: str, value: float | None = None,
        select_operate: bool = False,
    ) -> CommandStatus:
        session, entry = self.find_tag(tag)
        if action in ("latch_on", "latch_off"):
            status = session.operate_binary(tag, action == "latch_on", select_operate)
        elif action == "analog":
            if value is None:
                raise MapError("analog control requires a value")
            status = session.operate_analog(tag, value, select_operate)
        else:
            raise MapError(f"unknown control action '{action}'")
        self._note(session, f"control {action} {tag} -> {status.name}")
        self._publish(session)
        return status

    # -- push fan-out ---------------------------------------------------------

    def add_listener(self, listener) -> None:
        """listener(list[TagView]) called with each poll cycle's deltas."""
        self._listeners.append(listener)

    def remove_listener(self, listener) -> None:
        try:
            self._listeners.remove(listener)
        except ValueError:
            pass

    def _publish(self, session: MasterSession) -> None:
        names = session.drain_dirty()
        if not names:
            return
        views = [self.view(session, session.tags[n]) for n in names]
        for listener in list(self._listeners):
            try:
                listener(views)
            except Exception:
                log.exception("push listener failed; removing it")
                self.remove_listener(listener)

    def _note(self, session: MasterSession, message: str) -> None:
        self.events.append(
            {
                "time": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
                "session": session.config.name,
                "message": message,
            }
        )
