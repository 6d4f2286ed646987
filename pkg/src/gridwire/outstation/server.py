"""The outstation server: one TCP listener multiplexing many outstations by
link destination address.

Connection handlers never touch simulator state directly: reads pull the
latest published snapshot, controls validate against it and enqueue commands
onto the simulator's queue.  Event buffers live per outstation; every
connection keeps its own confirm cursor, so several masters can poll one
outstation without stealing each other's events.
"""

from __future__ import annotations

import logging
import socket
import threading
import time
from dataclasses import dataclass, field, replace

from ..dnp3.app import (
    AnalogCommand,
    AnalogPoint,
    AppControl,
    AppFragment,
    BinaryPoint,
    CommandStatus,
    CounterPoint,
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
    CONTROL_FROM_OUTSTATION,
    FrameScanner,
    LinkFrame,
    encode_link_frame,
)
from ..dnp3.transport import TransportReassembler, TransportSegment, transport_segment
from ..errors import AppDecodeError, DeviceError, TransportError, UnsupportedObjectError
from ..grid.sim import GridState, Simulator
from ..pointmap import (
    DNP3Point,
    OutstationDef,
    PointField,
    PointMap,
    PointType,
    tag_name,
)
from .cmdlog import CommandLog
from .events import DEFAULT_BUFFER_CAPACITY, EventRecord, OutstationEvents
from .values import read_point, read_station

log = logging.getLogger(__name__)

DEFAULT_PORT = 20000

_STATIC_GROUPS = {
    PointType.BINARY_INPUT: (1, 2),
    PointType.ANALOG_INPUT: (30, 5),
    PointType.COUNTER_INPUT: (20, 1),
    PointType.BINARY_OUTPUT: (10, 2),
    PointType.ANALOG_OUTPUT: (40, 1),
}
_GROUP_TO_TYPE = {
    1: PointType.BINARY_INPUT,
    30: PointType.ANALOG_INPUT,
    20: PointType.COUNTER_INPUT,
    10: PointType.BINARY_OUTPUT,
    40: PointType.ANALOG_OUTPUT,
}
_STATIC_ORDER = (
    PointType.BINARY_INPUT,
    PointType.ANALOG_INPUT,
    PointType.COUNTER_INPUT,
    PointType.BINARY_OUTPUT,
    PointType.ANALOG_OUTPUT,
)


@dataclass
class OutstationOptions:
    max_fragment_octets: int = 2048
    select_window_s: float = 10.0
    event_buffer_capacity: int = DEFAULT_BUFFER_CAPACITY
    request_event_confirms: bool = True


def _flags(online: bool) -> int:
    return int(PointFlags.ONLINE) if online else 0


def _static_value(point: DNP3Point, reading, variation: int):
    if point.point_type in (PointType.BINARY_INPUT, PointType.BINARY_OUTPUT):
        return BinaryPoint(state=bool(reading.value), flags=_flags(reading.online))
    if point.point_type == PointType.COUNTER_INPUT:
        return CounterPoint(value=0, flags=_flags(reading.online))
    return AnalogPoint(value=float(reading.value), flags=_flags(reading.online))


@dataclass
class _Section:
    """One object header's worth of data, before fragment packing."""

    group: int
    variation: int
    start: int | None = None  # contiguous static range
    indices: list[int] = field(default_factory=list)
    values: list = field(default_factory=list)
    event_class: int | None = None
    event_seqnos: list[int] = field(default_factory=list)

    @property
    def is_range(self) -> bool:
        return self.start is not None


class _StationRuntime:
    def __init__(self, station: OutstationDef, options: OutstationOptions):
        self.station = station
        self.events = OutstationEvents(station, options.event_buffer_capacity)
        self.lock = threading.RLock()
        # conn id -> class -> confirmed seqno; registered on first event read
        self.consumers: dict[int, dict[int, int]] = {}

    def scan(self, readings, timestamp_ms: int) -> None:
        with self.lock:
            self.events.scan(readings, timestamp_ms)

    def register_consumer(self, conn_id: int) -> None:
        with self.lock:
            self.consumers.setdefault(conn_id, {1: -1, 2: -1, 3: -1})

    def drop_consumer(self, conn_id: int) -> None:
        with self.lock:
            self.consumers.pop(conn_id, None)
            self._prune()

    def confirm(self, conn_id: int, watermarks: dict[int, int]) -> None:
        with self.lock:
            cursor = self.consumers.setdefault(conn_id, {1: -1, 2: -1, 3: -1})
            for cls, seqno in watermarks.items():
                cursor[cls] = max(cursor[cls], seqno)
                self.events.buffers[cls].acknowledge(cursor[cls])
            self._prune()

    def _prune(self) -> None:
        if not self.consumers:
            return
        for cls, buffer in self.events.buffers.items():
            low = min(cursor[cls] for cursor in self.consumers.values())
            buffer.prune_through(low)

    def iin(self) -> Iin:
        class1, class2, class3, overflow = self.events.iin_bits()
        bits = Iin(0)
        if class1:
            bits |= Iin.CLASS_1_EVENTS
        if class2:
            bits |= Iin.CLASS_2_EVENTS
        if class3:
            bits |= Iin.CLASS_3_EVENTS
        if overflow:
            bits |= Iin.EVENT_BUFFER_OVERFLOW
        return bits


class _ConnStation:
    """Per-connection, per-outstation session state."""

    def __init__(self):
        self.reassembler = TransportReassembler()
        self.transport_seq = 0
        self.select_arm: tuple[tuple, float] | None = None  # (identity, deadline)
        self.confirmed: dict[int, int] = {1: -1, 2: -1, 3: -1}
        self.pending: dict[int, dict[int, int]] = {}  # app seq -> class -> watermark


class OutstationServer:
    def __init__(
        self,
        sim: Simulator,
        point_map: PointMap,
        host: str = "127.0.0.1",
        port: int = DEFAULT_PORT,
        options: OutstationOptions | None = None,
        command_log: CommandLog | None = None,
    ):
        self.sim = sim
        self.map = point_map
        self.options = options or OutstationOptions()
        self.command_log = command_log if command_log is not None else CommandLog()
        self._host = host
        self._port = port
        self._stations = {
            station.number: _StationRuntime(station, self.options)
            for station in point_map.outstations
        }
        self._sock: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._conn_lock = threading.Lock()
        self._stop = threading.Event()
        self._next_conn_id = 0

    # -- lifecycle ---------------------------------------------------------

    @property
    def port(self) -> int:
        assert self._sock is not None, "server not started"
        return self._sock.getsockname()[1]

    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self._host, self._port))
        sock.listen(16)
        sock.settimeout(0.25)  # bounded accept wait keeps shutdown prompt
        self._sock = sock
        # prime deadband state from the current snapshot, then follow ticks
        self._scan_tick(self.sim.snapshot())
        self.sim.add_tick_listener(self._scan_tick)
        acceptor = threading.Thread(target=self._accept_loop, name="dnp3-accept", daemon=True)
        acceptor.start()
        self._threads.append(acceptor)
        log.info("outstation server listening on %s:%d", self._host, self.port)

    def stop(self) -> None:
        self._stop.set()
        self.sim.remove_tick_listener(self._scan_tick)
        if self._sock:
            try:
                self._sock.close()
            except OSError:
                pass
        with self._conn_lock:
            conns = list(self._conns)
        for conn in conns:
            try:
                conn.close()
            except OSError:
                pass
        for thread in self._threads:
            thread.join(timeout=2.0)
        self.command_log.close()

    # -- simulation hookup ---------------------------------------------------

    def _scan_tick(self, state: GridState) -> None:
        for runtime in self._stations.values():
            readings = read_station(self.sim.case, state, runtime.station)
            runtime.scan(readings, state.timestamp_ms)

    # -- networking ----------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._sock is not None
        while not self._stop.is_set():
            try:
                conn, addr = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            with self._conn_lock:
                self._conns.add(conn)
                self._next_conn_id += 1
                conn_id = self._next_conn_id
            thread = threading.Thread(
                target=self._serve_connection,
                args=(conn, addr, conn_id),
                name=f"dnp3-conn-{conn_id}",
                daemon=True,
            )
            thread.start()
            self._threads.append(thread)

    def _serve_connection(self, conn: socket.socket, addr, conn_id: int) -> None:
        scanner = FrameScanner()
        contexts: dict[int, _ConnStation] = {}
        peer = f"{addr[0]}:{addr[1]}"
        conn.settimeout(0.5)
        try:
            while not self._stop.is_set():
                try:
                    chunk = conn.recv(4096)
                except socket.timeout:
                    continue
                except OSError:
                    break
                if not chunk:
                    break
                for frame in scanner.feed(chunk):
                    self._handle_frame(conn, peer, conn_id, contexts, frame)
        except Exception:
            log.exception("connection %s failed; closing", peer)
        finally:
            for number in contexts:
                self._stations[number].drop_consumer(conn_id)
            with self._conn_lock:
                self._conns.discard(conn)
            try:
                conn.close()
            except OSError:
                pass

    def _handle_frame(self, conn, peer, conn_id, contexts, frame: LinkFrame) -> None:
        runtime = self._stations.get(frame.destination)
        if runtime is None:
            log.warning(
                "dropping frame from %s for unconfigured outstation %d", peer, frame.destination
            )
            return
        if not frame.user_data:
            return  # link-only frames carry nothing for us
        ctx = contexts.get(frame.destination)
        if ctx is None:
            ctx = contexts[frame.destination] = _ConnStation()
        try:
            segment = TransportSegment.decode(frame.user_data)
            app_bytes = ctx.reassembler.feed(segment)
        except TransportError as exc:
            log.warning("transport error from %s: %s", peer, exc)
            return
        if app_bytes is None:
            return
        try:
            fragment = decode_app_fragment(app_bytes)
        except UnsupportedObjectError as exc:
            log.warning("unsupported object from %s: %s", peer, exc)
            self._send_error(conn, ctx, runtime, frame, app_bytes, Iin.OBJECT_UNKNOWN)
            return
        except AppDecodeError as exc:
            log.warning("undecodable fragment from %s: %s", peer, exc)
            return
        if fragment.function == FunctionCode.READ:
            self._handle_read(conn, ctx, conn_id, runtime, frame, fragment)
        elif fragment.function in (
            FunctionCode.SELECT,
            FunctionCode.OPERATE,
            FunctionCode.DIRECT_OPERATE,
        ):
            self._handle_control(conn, ctx, runtime, frame, fragment, peer)
        elif fragment.function == FunctionCode.CONFIRM:
            self._handle_confirm(ctx, conn_id, runtime, fragment)
        elif fragment.function == FunctionCode.WRITE:
            self._handle_write(conn, ctx, runtime, frame, fragment)
        else:
            self._respond(
                conn, ctx, runtime, frame,
                [AppFragment(
                    control=AppControl(sequence=fragment.control.sequence),
                    function=FunctionCode.RESPONSE,
                    iin=runtime.iin() | Iin.NO_FUNC_CODE_SUPPORT,
                )],
            )

    # -- READ ---------------------------------------------------------------

    def _handle_read(self, conn, ctx, conn_id, runtime, frame, request) -> None:
        state = self.sim.snapshot()
        sections: list[_Section] = []
        param_error = False
        with runtime.lock:
            for block in request.objects:
                if block.group == 60:
                    if block.variation == 1:
                        sections.extend(self._static_sections(runtime.station, state, None))
                    else:
                        runtime.register_consumer(conn_id)
                        sections.extend(
                            self._event_sections(runtime, ctx, block.variation - 1)
                        )
                    continue
                point_type = _GROUP_TO_TYPE.get(block.group)
                if point_type is None:
                    param_error = True
                    continue
                configured = runtime.station.by_type(point_type)
                if block.qualifier == Qualifier.ALL_OBJECTS:
                    wanted = (0, len(configured) - 1)
                else:
                    wanted = (block.start, block.stop)
                if configured and 0 <= wanted[0] <= wanted[1] < len(configured):
                    sections.extend(
                        self._static_sections(
                            runtime.station, state, (point_type, block.variation, wanted)
                        )
                    )
                elif not (block.qualifier == Qualifier.ALL_OBJECTS and not configured):
                    param_error = True
        fragments = self._pack(ctx, runtime, request.control.sequence, sections, param_error)
        self._respond(conn, ctx, runtime, frame, fragments)

    def _static_sections(self, station, state, only) -> list[_Section]:
        sections = []
        types = _STATIC_ORDER if only is None else (only[0],)
        for point_type in types:
            points = station.by_type(point_type)
            if not points:
                continue
            group, default_var = _STATIC_GROUPS[point_type]
            variation = default_var
            lo, hi = 0, len(points) - 1
            if only is not None:
                requested_var = only[1]
                if (group, requested_var) in ((30, 1), (30, 5)):
                    variation = requested_var
                lo, hi = only[2]
            section = _Section(group=group, variation=variation, start=lo)
            for point in points[lo : hi + 1]:
                reading = read_point(self.sim.case, state, point)
                section.values.append(_static_value(point, reading, variation))
            sections.append(section)
        return sections

    def _event_sections(self, runtime, ctx, event_class: int) -> list[_Section]:
        buffer = runtime.events.buffers[event_class]
        pending = buffer.pending(ctx.confirmed[event_class])
        sections: list[_Section] = []
        current: _Section | None = None
        for record in pending:
            group, variation = (2, 2) if record.point_type == PointType.BINARY_INPUT else (32, 3)
            if current is None or current.group != group:
                current = _Section(group=group, variation=variation, event_class=event_class)
                sections.append(current)
            current.indices.append(record.index)
            current.values.append(_event_value(record))
            current.event_seqnos.append(record.seqno)
        return sections

    def _pack(
        self, ctx, runtime, first_seq: int, sections: list[_Section], param_error: bool
    ) -> list[AppFragment]:
        budget = self.options.max_fragment_octets - 4  # app control + func + IIN
        frag_blocks: list[list[ObjectBlock]] = [[]]
        frag_marks: list[dict[int, int]] = [{}]
        used = 0

        def block_cost(section: _Section, count: int) -> int:
            value_size = {
                (1, 2): 1, (10, 2): 1, (2, 2): 7, (20, 1): 5,
                (30, 1): 5, (30, 5): 5, (40, 1): 5, (32, 3): 11,
            }[(section.group, section.variation)]
            index_size = 2 if not section.is_range else 0
            return 7 + count * (value_size + index_size)

        def close_fragment():
            nonlocal used
            frag_blocks.append([])
            frag_marks.append({})
            used = 0

        for section in sections:
            offset = 0
            while offset < len(section.values):
                room = budget - used
                if room < block_cost(section, 1):
                    close_fragment()
                    room = budget
                per_value = block_cost(section, 2) - block_cost(section, 1)
                take = min(len(section.values) - offset, max(1, (room - 7) // per_value))
                chunk_values = tuple(section.values[offset : offset + take])
                if section.is_range:
                    start = section.start + offset
                    stop = start + take - 1
                    q = Qualifier.START_STOP_1 if stop <= 255 else Qualifier.START_STOP_2
                    block = ObjectBlock(
                        section.group, section.variation, q,
                        start=start, stop=stop, values=chunk_values,
                    )
                else:
                    idx = tuple(section.indices[offset : offset + take])
                    q = (
                        Qualifier.COUNT_1_INDEX_1
                        if max(idx) <= 255 and take <= 255
                        else Qualifier.COUNT_2_INDEX_2
                    )
                    block = ObjectBlock(
                        section.group, section.variation, q, indices=idx, values=chunk_values
                    )
                    if section.event_class is not None:
                        marks = frag_marks[-1]
                        high = max(section.event_seqnos[offset : offset + take])
                        marks[section.event_class] = max(
                            marks.get(section.event_class, -1), high
                        )
                frag_blocks[-1].append(block)
                used += block_cost(section, take)
                offset += take

        fragments = []
        total = len(frag_blocks)
        for i, blocks in enumerate(frag_blocks):
            if i > 0 and not blocks:
                continue  # trailing empty fragment from a final close
            seq = (first_seq + i) % 16
            marks = frag_marks[i]
            iin = runtime.iin()
            if param_error:
                iin |= Iin.PARAMETER_ERROR
            con = bool(marks) and self.options.request_event_confirms
            if marks:
                ctx.pending[seq] = marks
            fragments.append(
                AppFragment(
                    control=AppControl(
                        fir=(i == 0), fin=(i == total - 1 or not any(frag_blocks[i + 1 :])),
                        con=con, sequence=seq,
                    ),
                    function=FunctionCode.RESPONSE,
                    iin=iin,
                    objects=tuple(blocks),
                )
            )
        return fragments

    # -- CONFIRM --------------------------------------------------------------

    def _handle_confirm(self, ctx, conn_id, runtime, fragment) -> None:
        marks = ctx.pending.pop(fragment.control.sequence, None)
        if marks is None:
            return
        for cls, seqno in marks.items():
            ctx.confirmed[cls] = max(ctx.confirmed[cls], seqno)
        runtime.confirm(conn_id, marks)

    # -- WRITE (time sync acknowledged, ignored) ------------------------------

    def _handle_write(self, conn, ctx, runtime, frame, fragment) -> None:
        iin = runtime.iin()
        if any(block.group != 50 for block in fragment.objects):
            iin |= Iin.OBJECT_UNKNOWN
        self._respond(
            conn, ctx, runtime, frame,
            [AppFragment(
                control=AppControl(sequence=fragment.control.sequence),
                function=FunctionCode.RESPONSE,
                iin=iin,
            )],
        )

    # -- controls ---------------------------------------------------------

    def _handle_control(self, conn, ctx, runtime, frame, request, peer) -> None:
        execute = request.function != FunctionCode.SELECT
        arm = request.function == FunctionCode.SELECT
        check_arm = request.function == FunctionCode.OPERATE
        state = self.sim.snapshot()
        echoed_blocks = []
        identity = _control_identity(request)
        for block in request.objects:
            new_values = []
            for index, value in zip(block.point_indices(), block.values):
                if check_arm:
                    armed = ctx.select_arm
                    now = time.monotonic()
                    if armed is None or armed[0] != identity or now > armed[1]:
                        ctx.select_arm = None
                        new_values.append(replace(value, status=int(CommandStatus.NO_SELECT)))
                        continue
                status = self._control_point(runtime, state, block, index, value,
                                             execute=execute, peer=peer, frame=frame)
                new_values.append(replace(value, status=int(status)))
            echoed_blocks.append(replace(block, values=tuple(new_values)))
        if arm and all(
            v.status == int(CommandStatus.SUCCESS) for b in echoed_blocks for v in b.values
        ):
            ctx.select_arm = (identity, time.monotonic() + self.options.select_window_s)
        if check_arm:
            ctx.select_arm = None
        self._respond(
            conn, ctx, runtime, frame,
            [AppFragment(
                control=AppControl(sequence=request.control.sequence),
                function=FunctionCode.RESPONSE,
                iin=runtime.iin(),
                objects=tuple(echoed_blocks),
            )],
        )

    def _control_point(
        self, runtime, state, block, index, value, *, execute, peer, frame
    ) -> CommandStatus:
        station = runtime.station
        if block.group == 12:
            point = station.find(PointType.BINARY_OUTPUT, index)
            if point is None:
                return CommandStatus.NOT_SUPPORTED
            if (value.code & 0x0F) > int(CrobCode.LATCH_OFF):
                return CommandStatus.NOT_SUPPORTED
            closes = CrobCode.closes(value.code)
            command_text = "close" if closes else "open"
            if not execute:
                return CommandStatus.SUCCESS
            try:
                self.sim.apply_device_status(point.device_type.sim_kind, point.keyfield, closes)
                status = CommandStatus.SUCCESS
            except DeviceError:
                status = CommandStatus.HARDWARE_ERROR
            self._log_command(runtime, point, command_text, status, peer, frame)
            return status
        if block.group == 41:
            point = station.find(PointType.ANALOG_OUTPUT, index)
            if point is None:
                return CommandStatus.NOT_SUPPORTED
            field_code = "mw" if point.field == PointField.MWSETPOINT else "vpu"
            command_text = f"set {value.value:g}"
            if not execute:
                offline = not state.device_on("generator", point.keyfield)
                return CommandStatus.HARDWARE_ERROR if offline else CommandStatus.SUCCESS
            try:
                self.sim.apply_setpoint(point.keyfield, field_code, value.value)
                status = CommandStatus.SUCCESS
            except DeviceError:
                status = CommandStatus.HARDWARE_ERROR
            self._log_command(runtime, point, command_text, status, peer, frame)
            return status
        return CommandStatus.NOT_SUPPORTED

    def _log_command(self, runtime, point, command_text, status, peer, frame) -> None:
        self.command_log.record(
            sim_time_s=self.sim.snapshot().time_s,
            source_address=frame.source,
            peer=peer,
            outstation=runtime.station.number,
            tag=tag_name(point, runtime.station),
            command=command_text,
            outcome=status.name,
        )

    # -- transmit ----------------------------------------------------------

    def _respond(self, conn, ctx, runtime, request_frame, fragments) -> None:
        for fragment in fragments:
            data = encode_app_fragment(fragment)
            for segment in transport_segment(data, ctx.transport_seq):
                ctx.transport_seq = (segment.sequence + 1) & 0x3F
                frame = LinkFrame(
                    destination=request_frame.source,
                    source=runtime.station.number,
                    control=CONTROL_FROM_OUTSTATION,
                    user_data=segment.encode(),
                )
                try:
                    conn.sendall(encode_link_frame(frame))
                except OSError as exc:
                    log.warning("send to %s failed: %s", request_frame.source, exc)
                    return

    def _send_error(self, conn, ctx, runtime, frame, app_bytes: bytes, iin: Iin) -> None:
        if len(app_bytes) < 2:
            return
        control = AppControl.decode(app_bytes[0])
        self._respond(
            conn, ctx, runtime, frame,
            [AppFragment(
                control=AppControl(sequence=control.sequence),
                function=FunctionCode.RESPONSE,
                iin=runtime.iin() | iin,
            )],
        )


def _event_value(record: EventRecord):
    if record.point_type == PointType.BINARY_INPUT:
        return BinaryPoint(
            state=bool(record.value),
            flags=_flags(record.online),
            timestamp_ms=record.timestamp_ms,
        )
    return AnalogPoint(
        value=float(record.value),
        flags=_flags(record.online),
        timestamp_ms=record.timestamp_ms,
    )


def _control_identity(request) -> tuple:
    return tuple(
        (block.group, block.variation, block.point_indices(), block.values)
        for block in request.objects
    )
