"""Server-side command log: every control a client executes, with repeat
counting, kept in memory and appended as JSON lines."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path


@dataclass
class CommandLogEntry:
    wall_time: str  # ISO-8601 of the most recent occurrence
    sim_time_s: float
    source_address: int
    peer: str
    outstation: int
    tag: str
    command: str
    outcome: str
    count: int = 1

    def key(self) -> tuple:
        return (self.source_address, self.outstation, self.tag, self.command, self.outcome)


class CommandLog:
    """Append-only with repeat folding: an identical command bumps the
    existing entry's count instead of adding a row."""

    def __init__(self, path: str | Path | None = None, limit: int = 1000):
        self._path = Path(path) if path else None
        self._limit = limit
        self._lock = threading.Lock()
        self._entries: list[CommandLogEntry] = []
        self._by_key: dict[tuple, CommandLogEntry] = {}
        self._fh = None
        if self._path:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = self._path.open("a", encoding="utf-8")

    def record(
        self,
        *,
        sim_time_s: float,
        source_address: int,
        peer: str,
        outstation: int,
        tag: str,
        command: str,
        outcome: str,
    ) -> CommandLogEntry:
        now = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())
        with self._lock:
            probe = CommandLogEntry(
                wall_time=now,
                sim_time_s=sim_time_s,
                source_address=source_address,
                peer=peer,
                outstation=outstation,
                tag=tag,
                command=command,
                outcome=outcome,
            )
            existing = self._by_key.get(probe.key())
            if existing is not None:
                existing.count += 1
                existing.wall_time = now
                existing.sim_time_s = sim_time_s
                entry = existing
            else:
                self._entries.append(probe)
                self._by_key[probe.key()] = probe
                if len(self._entries) > self._limit:
                    dropped = self._entries.pop(0)
                    self._by_key.pop(dropped.key(), None)
                entry = probe
            if self._fh:
                self._fh.write(json.dumps(asdict(entry)) + "\n")
                self._fh.flush()
            return entry

    def entries(self, offset: int = 0, limit: int = 50) -> list[CommandLogEntry]:
        """Newest first."""
        with self._lock:
            newest = list(reversed(self._entries))
        return newest[offset : offset + limit]

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def close(self) -> None:
        with self._lock:
            if self._fh:
                self._fh.close()
                self._fh = None


def read_jsonl(path: str | Path) -> list[CommandLogEntry]:
    """Reload a log file; the last line per command key carries the final
    count, so later lines win."""
    by_key: dict[tuple, CommandLogEntry] = {}
    order: list[tuple] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        entry = CommandLogEntry(**json.loads(line))
        if entry.key() not in by_key:
            order.append(entry.key())
        by_key[entry.key()] = entry
    return [by_key[k] for k in order]
