"""One master session: a stop-and-wait DNP3 client for one outstation.

Keeps the named tag database (instantaneous value, last event-reported
value, validity), automation-controller-style health counters, and the
control path.  All wire operations are synchronous; the scheduling loop in
:mod:`gridwire.master.master` drives them periodically.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field

from ..dnp3.app import (
    AnalogCommand,
    AppControl,
    AppFragment,
    CommandStatus,
    Crob,
    CrobCode,
    FunctionCode,
    Iin,
    ObjectBlock,
    PointFlags,
    Qualifier,
    decode_app_fragment,
    encode_app_fragment,
)
from ..dnp3.link import (
    CONTROL_FROM_MASTER,
    FrameScanner,
    LinkFrame,
    encode_link_frame,
)
from ..dnp3.transport import TransportReassembler, TransportSegment, transport_segment
from ..errors import ConfigError, GridwireError, MapError
from ..pointmap import DNP3Point, OutstationDef, PointField, PointType, tag_name

log = logging.getLogger(__name__)

_EVENT_GROUPS = {2: PointType.BINARY_INPUT, 32: PointType.ANALOG_INPUT}
_STATIC_GROUPS = {
    1: PointType.BINARY_INPUT,
    10: PointType.BINARY_OUTPUT,
    20: PointType.COUNTER_INPUT,
    30: PointType.ANALOG_INPUT,
    40: PointType.ANALOG_OUTPUT,
}

_UNITS = {
    PointField.MW: "MW",
    PointField.MVAR: "MVar",
    PointField.VPU: "pu",
    PointField.MWSETPOINT: "MW",
    PointField.VPUSETPOINT: "pu",
    PointField.STATUS: "",
}


@dataclass
class SessionConfig:
    server_dnp_address: int
    name: str = ""
    server_ip: str = "127.0.0.1"
    server_port: int = 20000
    client_dnp_address: int = 3
    integrity_poll_period_s: float = 60.0
    class_poll_period_s: float = 2.0
    poll_timeout_s: float = 5.0
    max_retries: int = 3

    def __post_init__(self):
        if not self.name:
            self.name = f"PowerWorld_RTAC_{self.server_dnp_address}"
        if self.integrity_poll_period_s <= 0 or self.class_poll_period_s <= 0:
            raise ConfigError(f"session {self.name}: poll periods must be positive")
        if not self.poll_timeout_s < self.integrity_poll_period_s:
            raise ConfigError(
                f"session {self.name}: poll timeout must be below the integrity period"
            )
        for label, addr in (
            ("server", self.server_dnp_address),
            ("client", self.client_dnp_address),
        ):
            if not 0 <= addr <= 65519:
                raise ConfigError(f"session {self.name}: {label} DNP address out of range")


@dataclass
class TagEntry:
    name: str
    point: DNP3Point
    outstation: int
    unit: str
    inst_mag: float | bool | None = None
    mag: float | bool | None = None
    online: bool = True
    timestamp_ms: int | None = None
    covered_at: float = field(default=-1.0, repr=False)


@dataclass
class SessionHealth:
    offline: bool = True
    message_sent_count: int = 0
    message_received_count: int = 0
    message_success_count: int = 0
    message_failure_count: int = 0
    consecutive_failures: int = 0


class MasterSession:
    def __init__(self, config: SessionConfig, station: OutstationDef, keep_trace: bool = False):
        if station.number != config.server_dnp_address:
            raise ConfigError(
                f"session {config.name}: server DNP address {config.server_dnp_address} "
                f"does not match outstation {station.number}"
            )
        self.config = config
        self.station = station
        self.health = SessionHealth()
        self.tags: dict[str, TagEntry] = {}
        self._by_point: dict[tuple[PointType, int], TagEntry] = {}
        for point in station.points:
            entry = TagEntry(
                name=tag_name(point, station),
                point=point,
                outstation=station.number,
                unit=_UNITS[point.field],
            )
            self.tags[entry.name] = entry
            self._by_point[(point.point_type, point.index)] = entry
        self._sock: socket.socket | None = None
        self._scanner = FrameScanner()
        self._reassembler = TransportReassembler()
        self._frames: deque[LinkFrame] = deque()
        self._app_seq = 0
        self._transport_seq = 0
        self._lock = threading.RLock()
        self.dirty: set[str] = set()
        self.prompt_poll = threading.Event()
        self.last_warning: str = ""
        self.trace: list[tuple[str, AppFragment]] | None = [] if keep_trace else None

    # -- connection ---------------------------------------------------------

    def connect(self) -> None:
        with self._lock:
            if self._sock is not None:
                return
            sock = socket.create_connection(
                (self.config.server_ip, self.config.server_port),
                timeout=self.config.poll_timeout_s,
            )
            sock.settimeout(self.config.poll_timeout_s)
            self._sock = sock
            self._scanner = FrameScanner()
            self._reassembler = TransportReassembler()
            self._frames.clear()

    def close(self) -> None:
        with self._lock:
            if self._sock is not None:
                try:
                    self._sock.close()
                except OSError:
                    pass
                self._sock = None

    @property
    def connected(self) -> bool:
        return self._sock is not None

    # -- polling -----------------------------------------------------------

    def poll_integrity(self) -> bool:
        """Event classes first, then the full static refresh."""
        blocks = tuple(
            ObjectBlock(60, v, Qualifier.ALL_OBJECTS) for v in (2, 3, 4, 1)
        )
        return self._poll(blocks, covers_all=True)

    def poll_classes(self) -> bool:
        blocks = tuple(ObjectBlock(60, v, Qualifier.ALL_OBJECTS) for v in (2, 3, 4))
        return self._poll(blocks, covers_all=False)

    def poll_class(self, event_class: int) -> bool:
        if event_class == 0:
            return self._poll((ObjectBlock(60, 1, Qualifier.ALL_OBJECTS),), covers_all=True)
        return self._poll(
            (ObjectBlock(60, event_class + 1, Qualifier.ALL_OBJECTS),), covers_all=False
        )

    def _poll(self, blocks: tuple[ObjectBlock, ...], covers_all: bool) -> bool:
        request = AppFragment(
            control=AppControl(sequence=self._next_seq()),
            function=FunctionCode.READ,
            objects=blocks,
        )
        try:
            fragments = self._transact(request)
        except GridwireError as exc:
            log.debug("session %s poll failed: %s", self.config.name, exc)
            return False
        classes = {b.variation - 1 for b in blocks if b.variation > 1}
        with self._lock:
            for fragment in fragments:
                self._apply_fragment(fragment)
            now = time.monotonic()
            for entry in self.tags.values():
                if covers_all or entry.point.event_class in classes:
                    entry.covered_at = now
        return True

    # -- controls -----------------------------------------------------------

    def operate_binary(
        self, tag_or_index: str | int, latch_on: bool, select_operate: bool = False
    ) -> CommandStatus:
        entry = self._control_entry(tag_or_index, PointType.BINARY_OUTPUT)
        code = CrobCode.LATCH_ON if latch_on else CrobCode.LATCH_OFF
        block = _indexed_block(12, 1, entry.point.index, Crob(code=int(code)))
        return self._operate(block, select_operate)

    def operate_analog(
        self, tag_or_index: str | int, value: float, select_operate: bool = False
    ) -> CommandStatus:
        entry = self._control_entry(tag_or_index, PointType.ANALOG_OUTPUT)
        block = _indexed_block(41, 3, entry.point.index, AnalogCommand(value=float(value)))
        return self._operate(block, select_operate)

    def _control_entry(self, tag_or_index: str | int, expected: PointType) -> TagEntry:
        if isinstance(tag_or_index, int):
            entry = self._by_point.get((expected, tag_or_index))
            if entry is None:
                raise MapError(f"no {expected.value} point at index {tag_or_index}")
            return entry
        entry = self.tags.get(tag_or_index)
        if entry is None:
            raise MapError(f"unknown tag '{tag_or_index}'")
        if entry.point.point_type != expected:
            raise MapError(
                f"tag '{tag_or_index}' is {entry.point.point_type.value}, "
                f"not {expected.value}"
            )
        return entry

    def _operate(self, block: ObjectBlock, select_operate: bool) -> CommandStatus:
        if select_operate:
            status = self._control_exchange(FunctionCode.SELECT, block)
            if status != CommandStatus.SUCCESS:
                return status
            status = self._control_exchange(FunctionCode.OPERATE, block)
        else:
            status = self._control_exchange(FunctionCode.DIRECT_OPERATE, block)
        if status == CommandStatus.SUCCESS:
            self.prompt_poll.set()
        return status

    def _control_exchange(self, function: FunctionCode, block: ObjectBlock) -> CommandStatus:
        request = AppFragment(
            control=AppControl(sequence=self._next_seq()),
            function=function,
            objects=(block,),
        )
        fragments = self._transact(request)
        for fragment in fragments:
            for rblock in fragment.objects:
                for value in rblock.values:
                    return CommandStatus(value.status)
        raise GridwireError("control response carried no echoed object")

    # -- wire --------------------------------------------------------------

    def _next_seq(self) -> int:
        seq = self._app_seq
        self._app_seq = (self._app_seq + 1) & 0x0F
        return seq

    def _send_fragment(self, fragment: AppFragment) -> None:
        assert self._sock is not None
        data = encode_app_fragment(fragment)
        for segment in transport_segment(data, self._transport_seq):
            self._transport_seq = (segment.sequence + 1) & 0x3F
            frame = LinkFrame(
                destination=self.config.server_dnp_address,
                source=self.config.client_dnp_address,
                control=CONTROL_FROM_MASTER,
                user_data=segment.encode(),
            )
            self._sock.sendall(encode_link_frame(frame))
        self.health.message_sent_count += 1
        if self.trace is not None:
            self.trace.append(("tx", fragment))

    def _read_fragment(self) -> AppFragment:
        assert self._sock is not None
        deadline = time.monotonic() + self.config.poll_timeout_s
        while True:
            while self._frames:
                frame = self._frames.popleft()
                if frame.source != self.config.server_dnp_address or not frame.user_data:
                    continue
                segment = TransportSegment.decode(frame.user_data)
                app_bytes = self._reassembler.feed(segment)
                if app_bytes is None:
                    continue
                fragment = decode_app_fragment(app_bytes)
                self.health.message_received_count += 1
                if self.trace is not None:
                    self.trace.append(("rx", fragment))
                return fragment
            if time.monotonic() > deadline:
                raise TimeoutError("poll timeout")
            try:
                chunk = self._sock.recv(4096)
            except socket.timeout as exc:
                raise TimeoutError("poll timeout") from exc
            if not chunk:
                raise ConnectionError("server closed the connection")
            self._frames.extend(self._scanner.feed(chunk))

    def _transact(self, request: AppFragment) -> list[AppFragment]:
        """Send one request and collect the (possibly multi-fragment)
        response, confirming event-bearing fragments."""
        with self._lock:
            request_sent = False
            try:
                self.connect()
                self._send_fragment(request)
                request_sent = True
                fragments: list[AppFragment] = []
                expect_seq = request.control.sequence
                while True:
                    fragment = self._read_fragment()
                    if fragment.function == FunctionCode.UNSOLICITED_RESPONSE:
                        continue  # never enabled; tolerate and skip
                    if fragment.function != FunctionCode.RESPONSE:
                        raise GridwireError(f"unexpected {fragment.function.name} from server")
                    if fragment.control.sequence != expect_seq:
                        raise GridwireError(
                            f"response sequence {fragment.control.sequence}, "
                            f"expected {expect_seq}"
                        )
                    fragments.append(fragment)
                    if fragment.control.con:
                        confirm = AppFragment(
                            control=AppControl(sequence=fragment.control.sequence),
                            function=FunctionCode.CONFIRM,
                        )
                        self._send_fragment(confirm)
                    if fragment.control.fin:
                        break
                    expect_seq = (expect_seq + 1) & 0x0F
            except (TimeoutError, OSError, GridwireError) as exc:
                self._failure(exc, message_counted=request_sent)
                raise GridwireError(str(exc)) from exc
            self.health.message_success_count += 1
            self.health.consecutive_failures = 0
            if self.health.offline:
                self.health.offline = False
                log.info("session %s online", self.config.name)
            for fragment in fragments:
                if fragment.iin & Iin.PARAMETER_ERROR:
                    self.last_warning = "server flagged a parameter error"
                    log.warning("session %s: %s", self.config.name, self.last_warning)
            return fragments

    def _failure(self, exc: Exception, message_counted: bool = True) -> None:
        # a refused connect is a failed poll attempt but not a failed message
        if message_counted:
            self.health.message_failure_count += 1
        self.health.consecutive_failures += 1
        if self.health.consecutive_failures >= self.config.max_retries:
            if not self.health.offline:
                log.warning("session %s offline: %s", self.config.name, exc)
            self.health.offline = True
        self.close()

    # -- tag updates ---------------------------------------------------------

    def _apply_fragment(self, fragment: AppFragment) -> None:
        now_ms = int(time.time() * 1000)
        for block in fragment.objects:
            event_type = _EVENT_GROUPS.get(block.group)
            static_type = _STATIC_GROUPS.get(block.group)
            for index, value in zip(block.point_indices(), block.values):
                if event_type is not None:
                    entry = self._by_point.get((event_type, index))
                    if entry is None:
                        continue
                    val = value.state if event_type == PointType.BINARY_INPUT else value.value
                    entry.inst_mag = val
                    entry.mag = val
                    entry.online = bool(value.flags & PointFlags.ONLINE)
                    entry.timestamp_ms = value.timestamp_ms or now_ms
                    entry.covered_at = time.monotonic()
                    self.dirty.add(entry.name)
                elif static_type is not None:
                    entry = self._by_point.get((static_type, index))
                    if entry is None:
                        continue
                    if static_type in (PointType.BINARY_INPUT, PointType.BINARY_OUTPUT):
                        entry.inst_mag = value.state
                    elif static_type == PointType.COUNTER_INPUT:
                        entry.inst_mag = float(value.value)
                    else:
                        entry.inst_mag = value.value
                    entry.online = bool(value.flags & PointFlags.ONLINE)
                    entry.timestamp_ms = now_ms
                    entry.covered_at = time.monotonic()
                    self.dirty.add(entry.name)

    # -- quality --------------------------------------------------------------

    def tag_valid(self, entry: TagEntry) -> bool:
        if self.health.offline or entry.covered_at < 0:
            return False
        if entry.point.event_class in (1, 2, 3):
            budget = self.config.class_poll_period_s + self.config.poll_timeout_s
        else:
            budget = self.config.integrity_poll_period_s + self.config.poll_timeout_s
        # generous: a freshly covered tag stays good through the next cycle
        return time.monotonic() - entry.covered_at <= budget * 2

    def drain_dirty(self) -> list[str]:
        with self._lock:
            names = sorted(self.dirty)
            self.dirty.clear()
        return names


def _indexed_block(group: int, variation: int, index: int, value) -> ObjectBlock:
    qualifier = Qualifier.COUNT_1_INDEX_1 if index <= 255 else Qualifier.COUNT_2_INDEX_2
    return ObjectBlock(group, variation, qualifier, indices=(index,), values=(value,))
