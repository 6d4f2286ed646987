"""Event generation and class buffers.

Analog points report through an instantaneous/reported value pair: an event
fires exactly when the live value moves more than the deadband away from the
last reported value, at which instant the reported value snaps to the live
one.  Binary points event on every status flip.  Class-0 points are
static-only and never queue.

Buffers are bounded FIFOs per class; an append beyond capacity discards the
oldest entry and raises the overflow indication until a confirmed poll has
drained the buffer.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Mapping

from ..pointmap import DNP3Point, OutstationDef, PointType

DEFAULT_BUFFER_CAPACITY = 1024


@dataclass(frozen=True)
class PointReading:
    value: float | bool
    online: bool


@dataclass(frozen=True)
class EventRecord:
    seqno: int
    point_type: PointType
    index: int
    value: float | bool
    online: bool
    timestamp_ms: int
    event_class: int


@dataclass
class AnalogReportState:
    inst_mag: float
    mag: float
    deadband: float

    def scan(self, new_value: float) -> bool:
        """Update the live value; True when this scan crosses the deadband
        (reported value snaps to the live one)."""
        self.inst_mag = new_value
        if abs(self.inst_mag - self.mag) > self.deadband:
            self.mag = self.inst_mag
            return True
        return False


class ClassBuffer:
    def __init__(self, capacity: int = DEFAULT_BUFFER_CAPACITY):
        self.capacity = capacity
        self._events: deque[EventRecord] = deque()
        self.overflowed = False

    def __len__(self) -> int:
        return len(self._events)

    def append(self, record: EventRecord) -> None:
        if len(self._events) >= self.capacity:
            self._events.popleft()
            self.overflowed = True
        self._events.append(record)

    def pending(self, after_seqno: int, limit: int | None = None) -> list[EventRecord]:
        out = [e for e in self._events if e.seqno > after_seqno]
        return out if limit is None else out[:limit]

    @property
    def newest_seqno(self) -> int:
        return self._events[-1].seqno if self._events else -1

    def prune_through(self, seqno: int) -> None:
        while self._events and self._events[0].seqno <= seqno:
            self._events.popleft()

    def acknowledge(self, confirmed_seqno: int) -> None:
        """A confirmed poll reached ``confirmed_seqno``; drop the overflow
        indication once everything present has been seen."""
        if self.overflowed and confirmed_seqno >= self.newest_seqno:
            self.overflowed = False


class OutstationEvents:
    """Scanner plus the three class buffers for one outstation."""

    def __init__(self, station: OutstationDef, capacity: int = DEFAULT_BUFFER_CAPACITY):
        self.station = station
        self.buffers: dict[int, ClassBuffer] = {c: ClassBuffer(capacity) for c in (1, 2, 3)}
        self._seq = itertools.count()
        self._analog: dict[tuple[PointType, int], AnalogReportState] = {}
        self._binary_last: dict[tuple[PointType, int], bool] = {}
        self._primed = False

    def analog_state(self, point: DNP3Point) -> AnalogReportState | None:
        return self._analog.get((point.point_type, point.index))

    def scan(
        self,
        readings: Mapping[tuple[PointType, int], PointReading],
        timestamp_ms: int,
    ) -> list[EventRecord]:
        """Process one tick's readings; returns the newly queued events.

        The first scan primes reported values without generating events.
        """
        produced: list[EventRecord] = []
        for point in self.station.points:
            key = (point.point_type, point.index)
            reading = readings.get(key)
            if reading is None:
                continue
            if point.point_type == PointType.BINARY_INPUT:
                state = bool(reading.value)
                if not self._primed:
                    self._binary_last[key] = state
                    continue
                if point.event_class == 0:
                    self._binary_last[key] = state
                    continue
                if state != self._binary_last.get(key, state):
                    produced.append(self._emit(point, state, reading.online, timestamp_ms))
                self._binary_last[key] = state
            elif point.point_type == PointType.ANALOG_INPUT:
                value = float(reading.value)
                report = self._analog.get(key)
                if report is None:
                    report = AnalogReportState(
                        inst_mag=value, mag=value, deadband=point.deadband
                    )
                    self._analog[key] = report
                    continue
                crossed = report.scan(value)
                if crossed and self._primed and point.event_class != 0:
                    produced.append(self._emit(point, value, reading.online, timestamp_ms))
        self._primed = True
        return produced

    def _emit(
        self, point: DNP3Point, value: float | bool, online: bool, timestamp_ms: int
    ) -> EventRecord:
        record = EventRecord(
            seqno=next(self._seq),
            point_type=point.point_type,
            index=point.index,
            value=value,
            online=online,
            timestamp_ms=timestamp_ms,
            event_class=point.event_class,
        )
        self.buffers[point.event_class].append(record)
        return record

    def iin_bits(self) -> tuple[bool, bool, bool, bool]:
        """(class1 pending, class2 pending, class3 pending, any overflow)."""
        return (
            len(self.buffers[1]) > 0,
            len(self.buffers[2]) > 0,
            len(self.buffers[3]) > 0,
            any(b.overflowed for b in self.buffers.values()),
        )
