"""DNP3 application layer: fragments, object headers, and the object
variations the testbed speaks.

Supported objects:

====== ========= ===============================================
group  variation meaning
====== ========= ===============================================
1      2         binary input, static, with flags
2      2         binary input event, flags + 48-bit time
10     2         binary output status, with flags
12     1         control relay output block (CROB)
20     1         32-bit counter with flag
30     1 / 5     analog input static, 32-bit int / float, with flag
32     3         analog input event, 32-bit int + 48-bit time
40     1         analog output status, 32-bit int with flag
41     3         analog output command, float + status octet
50     1         absolute time (written by masters; acknowledged, ignored)
60     1..4      class 0..3 poll requests (header only)
====== ========= ===============================================
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum, IntFlag
from typing import Any, Callable

from ..errors import AppDecodeError, UnsupportedObjectError


class FunctionCode(IntEnum):
    CONFIRM = 0x00
    READ = 0x01
    WRITE = 0x02
    SELECT = 0x03
    OPERATE = 0x04
    DIRECT_OPERATE = 0x05
    RESPONSE = 0x81
    UNSOLICITED_RESPONSE = 0x82


_RESPONSE_FUNCTIONS = frozenset({FunctionCode.RESPONSE, FunctionCode.UNSOLICITED_RESPONSE})


class Qualifier(IntEnum):
    START_STOP_1 = 0x00
    START_STOP_2 = 0x01
    ALL_OBJECTS = 0x06
    COUNT_1 = 0x07
    COUNT_1_INDEX_1 = 0x17
    COUNT_2_INDEX_2 = 0x28


class Iin(IntFlag):
    """Internal indications, low octet first on the wire."""

    BROADCAST = 0x0001
    CLASS_1_EVENTS = 0x0002
    CLASS_2_EVENTS = 0x0004
    CLASS_3_EVENTS = 0x0008
    NEED_TIME = 0x0010
    LOCAL_CONTROL = 0x0020
    DEVICE_TROUBLE = 0x0040
    DEVICE_RESTART = 0x0080
    NO_FUNC_CODE_SUPPORT = 0x0100
    OBJECT_UNKNOWN = 0x0200
    PARAMETER_ERROR = 0x0400
    EVENT_BUFFER_OVERFLOW = 0x0800
    ALREADY_EXECUTING = 0x1000
    CONFIG_CORRUPT = 0x2000


class PointFlags(IntFlag):
    ONLINE = 0x01
    RESTART = 0x02
    COMM_LOST = 0x04
    REMOTE_FORCED = 0x08
    LOCAL_FORCED = 0x10
    CHATTER_FILTER = 0x20


class CommandStatus(IntEnum):
    SUCCESS = 0
    TIMEOUT = 1
    NO_SELECT = 2
    FORMAT_ERROR = 3
    NOT_SUPPORTED = 4
    ALREADY_ACTIVE = 5
    HARDWARE_ERROR = 6
    LOCAL = 7
    TOO_MANY_OBJS = 8
    NOT_AUTHORIZED = 9


class CrobCode(IntEnum):
    """CROB operation field (low nibble) plus trip/close bits."""

    NUL = 0x00
    PULSE_ON = 0x01
    PULSE_OFF = 0x02
    LATCH_ON = 0x03
    LATCH_OFF = 0x04
    CLOSE_PULSE_ON = 0x41
    TRIP_PULSE_ON = 0x81

    @staticmethod
    def closes(code: int) -> bool:
        """True when the code commands close/on, False for open/off."""
        tcc = code & 0xC0
        if tcc == 0x40:
            return True
        if tcc == 0x80:
            return False
        return (code & 0x0F) in (CrobCode.PULSE_ON, CrobCode.LATCH_ON)


@dataclass(frozen=True)
class BinaryPoint:
    state: bool
    flags: int = int(PointFlags.ONLINE)
    timestamp_ms: int | None = None


@dataclass(frozen=True)
class AnalogPoint:
    value: float
    flags: int = int(PointFlags.ONLINE)
    timestamp_ms: int | None = None


@dataclass(frozen=True)
class CounterPoint:
    value: int
    flags: int = int(PointFlags.ONLINE)


@dataclass(frozen=True)
class Crob:
    code: int
    count: int = 1
    on_time_ms: int = 0
    off_time_ms: int = 0
    status: int = int(CommandStatus.SUCCESS)


@dataclass(frozen=True)
class AnalogCommand:
    value: float
    status: int = int(CommandStatus.SUCCESS)


@dataclass(frozen=True)
class TimeValue:
    ms_since_epoch: int


def _clamp_i32(value: float) -> int:
    v = int(round(value))
    return max(-(2**31), min(2**31 - 1, v))


def _enc_time48(ms: int) -> bytes:
    return int(ms).to_bytes(6, "little")


def _dec_time48(raw: bytes) -> int:
    return int.from_bytes(raw, "little")


def _enc_binary(p: BinaryPoint) -> bytes:
    return bytes(((p.flags & 0x7F) | (0x80 if p.state else 0),))


def _dec_binary(raw: bytes) -> BinaryPoint:
    return BinaryPoint(state=bool(raw[0] & 0x80), flags=raw[0] & 0x7F)


def _enc_binary_event(p: BinaryPoint) -> bytes:
    return _enc_binary(p) + _enc_time48(p.timestamp_ms or 0)


def _dec_binary_event(raw: bytes) -> BinaryPoint:
    return BinaryPoint(
        state=bool(raw[0] & 0x80), flags=raw[0] & 0x7F, timestamp_ms=_dec_time48(raw[1:7])
    )


def _enc_analog_float(p: AnalogPoint) -> bytes:
    return struct.pack("<Bf", p.flags & 0xFF, p.value)


def _dec_analog_float(raw: bytes) -> AnalogPoint:
    flags, value = struct.unpack("<Bf", raw)
    return AnalogPoint(value=value, flags=flags)


def _enc_analog_int(p: AnalogPoint) -> bytes:
    return struct.pack("<Bi", p.flags & 0xFF, _clamp_i32(p.value))


def _dec_analog_int(raw: bytes) -> AnalogPoint:
    flags, value = struct.unpack("<Bi", raw)
    return AnalogPoint(value=float(value), flags=flags)


def _enc_analog_event(p: AnalogPoint) -> bytes:
    return struct.pack("<Bi", p.flags & 0xFF, _clamp_i32(p.value)) + _enc_time48(
        p.timestamp_ms or 0
    )


def _dec_analog_event(raw: bytes) -> AnalogPoint:
    flags, value = struct.unpack("<Bi", raw[:5])
    return AnalogPoint(value=float(value), flags=flags, timestamp_ms=_dec_time48(raw[5:11]))


def _enc_counter(p: CounterPoint) -> bytes:
    return struct.pack("<BI", p.flags & 0xFF, p.value & 0xFFFFFFFF)


def _dec_counter(raw: bytes) -> CounterPoint:
    flags, value = struct.unpack("<BI", raw)
    return CounterPoint(value=value, flags=flags)


def _enc_crob(p: Crob) -> bytes:
    return struct.pack(
        "<BBIIB", p.code & 0xFF, p.count & 0xFF, p.on_time_ms, p.off_time_ms, p.status & 0xFF
    )


def _dec_crob(raw: bytes) -> Crob:
    code, count, on_ms, off_ms, status = struct.unpack("<BBIIB", raw)
    return Crob(code=code, count=count, on_time_ms=on_ms, off_time_ms=off_ms, status=status)


def _enc_analog_command(p: AnalogCommand) -> bytes:
    return struct.pack("<fB", p.value, p.status & 0xFF)


def _dec_analog_command(raw: bytes) -> AnalogCommand:
    value, status = struct.unpack("<fB", raw)
    return AnalogCommand(value=value, status=status)


def _enc_timeval(p: TimeValue) -> bytes:
    return _enc_time48(p.ms_since_epoch)


def _dec_timeval(raw: bytes) -> TimeValue:
    return TimeValue(ms_since_epoch=_dec_time48(raw))


@dataclass(frozen=True)
class _VarCodec:
    size: int
    encode: Callable[[Any], bytes]
    decode: Callable[[bytes], Any]


_CODECS: dict[tuple[int, int], _VarCodec] = {
    (1, 2): _VarCodec(1, _enc_binary, _dec_binary),
    (2, 2): _VarCodec(7, _enc_binary_event, _dec_binary_event),
    (10, 2): _VarCodec(1, _enc_binary, _dec_binary),
    (12, 1): _VarCodec(11, _enc_crob, _dec_crob),
    (20, 1): _VarCodec(5, _enc_counter, _dec_counter),
    (30, 1): _VarCodec(5, _enc_analog_int, _dec_analog_int),
    (30, 5): _VarCodec(5, _enc_analog_float, _dec_analog_float),
    (32, 3): _VarCodec(11, _enc_analog_event, _dec_analog_event),
    (40, 1): _VarCodec(5, _enc_analog_int, _dec_analog_int),
    (41, 3): _VarCodec(5, _enc_analog_command, _dec_analog_command),
    (50, 1): _VarCodec(6, _enc_timeval, _dec_timeval),
}

# Groups a READ request may name with variation 0 ("any") or a concrete one.
_READABLE_GROUPS = frozenset({1, 2, 10, 20, 30, 32, 40, 60})
_CLASS_GROUP = 60


@dataclass(frozen=True)
class ObjectHeader:
    group: int
    variation: int
    qualifier: Qualifier
    start: int | None = None
    stop: int | None = None
    count: int | None = None


@dataclass(frozen=True)
class ObjectBlock:
    """An object header plus its payload.

    ``indices`` accompanies ``values`` one-for-one under the
    count-with-index qualifiers; start-stop qualifiers imply indices
    ``start..stop``; header-only blocks (requests, class polls) carry
    neither.
    """

    group: int
    variation: int
    qualifier: Qualifier
    start: int | None = None
    stop: int | None = None
    indices: tuple[int, ...] = ()
    values: tuple[Any, ...] = ()

    def point_indices(self) -> tuple[int, ...]:
        if self.qualifier in (Qualifier.START_STOP_1, Qualifier.START_STOP_2):
            assert self.start is not None and self.stop is not None
            return tuple(range(self.start, self.stop + 1))
        return self.indices


@dataclass(frozen=True)
class AppControl:
    fir: bool = True
    fin: bool = True
    con: bool = False
    uns: bool = False
    sequence: int = 0

    def encode(self) -> int:
        return (
            (0x80 if self.fir else 0)
            | (0x40 if self.fin else 0)
            | (0x20 if self.con else 0)
            | (0x10 if self.uns else 0)
            | (self.sequence & 0x0F)
        )

    @classmethod
    def decode(cls, octet: int) -> "AppControl":
        return cls(
            fir=bool(octet & 0x80),
            fin=bool(octet & 0x40),
            con=bool(octet & 0x20),
            uns=bool(octet & 0x10),
            sequence=octet & 0x0F,
        )


@dataclass(frozen=True)
class AppFragment:
    control: AppControl
    function: FunctionCode
    iin: Iin = Iin(0)
    objects: tuple[ObjectBlock, ...] = ()

    @property
    def is_response(self) -> bool:
        return self.function in _RESPONSE_FUNCTIONS


def _headers_only(function: FunctionCode) -> bool:
    return function in (FunctionCode.READ, FunctionCode.CONFIRM)


def _codec_for(group: int, variation: int, qualifier: int) -> _VarCodec:
    codec = _CODECS.get((group, variation))
    if codec is None:
        raise UnsupportedObjectError(group, variation, qualifier)
    return codec


def _encode_block(block: ObjectBlock, headers_only: bool) -> bytes:
    out = bytearray((block.group, block.variation, int(block.qualifier)))
    q = block.qualifier
    if q == Qualifier.ALL_OBJECTS:
        if block.values:
            raise AppDecodeError("all-objects qualifier carries no payload")
        return bytes(out)
    if q in (Qualifier.START_STOP_1, Qualifier.START_STOP_2):
        if block.start is None or block.stop is None or block.stop < block.start:
            raise AppDecodeError(f"start-stop header needs a valid range, got {block}")
        width = 1 if q == Qualifier.START_STOP_1 else 2
        if block.stop >= 1 << (8 * width):
            raise AppDecodeError(f"range {block.stop} overflows {width}-octet qualifier")
        out += block.start.to_bytes(width, "little")
        out += block.stop.to_bytes(width, "little")
        if headers_only:
            return bytes(out)
        expected = block.stop - block.start + 1
        if len(block.values) != expected:
            raise AppDecodeError(
                f"g{block.group}v{block.variation} range declares {expected} "
                f"points but {len(block.values)} values given"
            )
        codec = _codec_for(block.group, block.variation, q)
        for value in block.values:
            out += codec.encode(value)
        return bytes(out)
    if q in (Qualifier.COUNT_1_INDEX_1, Qualifier.COUNT_2_INDEX_2):
        width = 1 if q == Qualifier.COUNT_1_INDEX_1 else 2
        if len(block.indices) != len(block.values):
            raise AppDecodeError("count-with-index block needs one index per value")
        out += len(block.values).to_bytes(width, "little")
        codec = _codec_for(block.group, block.variation, q)
        for index, value in zip(block.indices, block.values):
            out += index.to_bytes(width, "little")
            out += codec.encode(value)
        return bytes(out)
    if q == Qualifier.COUNT_1:
        out += len(block.values).to_bytes(1, "little")
        codec = _codec_for(block.group, block.variation, q)
        for value in block.values:
            out += codec.encode(value)
        return bytes(out)
    raise UnsupportedObjectError(block.group, block.variation, int(q))


def encode_app_fragment(frag: AppFragment) -> bytes:
    out = bytearray()
    out.append(frag.control.encode())
    out.append(int(frag.function))
    if frag.is_response:
        out += int(frag.iin).to_bytes(2, "little")
    elif frag.iin:
        raise AppDecodeError("requests carry no IIN")
    headers_only = _headers_only(frag.function)
    for block in frag.objects:
        out += _encode_block(block, headers_only)
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise AppDecodeError(
                f"fragment truncated: wanted {n} octets at {self.pos}, have {len(self.data)}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "little")

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def _check_read_header(group: int, variation: int, qualifier: int) -> None:
    if group not in _READABLE_GROUPS:
        raise UnsupportedObjectError(group, variation, qualifier)
    if group == _CLASS_GROUP:
        if variation not in (1, 2, 3, 4) or qualifier != Qualifier.ALL_OBJECTS:
            raise UnsupportedObjectError(group, variation, qualifier)
        return
    if variation != 0 and (group, variation) not in _CODECS:
        raise UnsupportedObjectError(group, variation, qualifier)


def _decode_block(r: _Reader, headers_only: bool) -> ObjectBlock:
    group = r.u8()
    variation = r.u8()
    raw_q = r.u8()
    try:
        q = Qualifier(raw_q)
    except ValueError:
        raise UnsupportedObjectError(group, variation, raw_q) from None
    if headers_only:
        _check_read_header(group, variation, raw_q)
    if q == Qualifier.ALL_OBJECTS:
        if not headers_only and (group, variation) not in _CODECS and group != _CLASS_GROUP:
            raise UnsupportedObjectError(group, variation, raw_q)
        return ObjectBlock(group, variation, q)
    if q in (Qualifier.START_STOP_1, Qualifier.START_STOP_2):
        width = 1 if q == Qualifier.START_STOP_1 else 2
        start = r.uint(width)
        stop = r.uint(width)
        if stop < start:
            raise AppDecodeError(f"inverted range {start}..{stop}")
        if headers_only:
            return ObjectBlock(group, variation, q, start=start, stop=stop)
        codec = _codec_for(group, variation, raw_q)
        values = tuple(codec.decode(r.take(codec.size)) for _ in range(stop - start + 1))
        return ObjectBlock(group, variation, q, start=start, stop=stop, values=values)
    if q in (Qualifier.COUNT_1_INDEX_1, Qualifier.COUNT_2_INDEX_2):
        if headers_only:
            raise UnsupportedObjectError(group, variation, raw_q)
        width = 1 if q == Qualifier.COUNT_1_INDEX_1 else 2
        count = r.uint(width)
        codec = _codec_for(group, variation, raw_q)
        indices = []
        values = []
        for _ in range(count):
            indices.append(r.uint(width))
            values.append(codec.decode(r.take(codec.size)))
        return ObjectBlock(group, variation, q, indices=tuple(indices), values=tuple(values))
    if q == Qualifier.COUNT_1:
        if headers_only:
            raise UnsupportedObjectError(group, variation, raw_q)
        count = r.uint(1)
        codec = _codec_for(group, variation, raw_q)
        values = tuple(codec.decode(r.take(codec.size)) for _ in range(count))
        return ObjectBlock(group, variation, q, values=values)
    raise UnsupportedObjectError(group, variation, raw_q)


def decode_app_fragment(data: bytes) -> AppFragment:
    r = _Reader(data)
    control = AppControl.decode(r.u8())
    raw_func = r.u8()
    try:
        function = FunctionCode(raw_func)
    except ValueError:
        raise AppDecodeError(f"unknown function code 0x{raw_func:02X}") from None
    iin = Iin(0)
    if function in _RESPONSE_FUNCTIONS:
        iin = Iin(r.uint(2))
    headers_only = _headers_only(function)
    objects = []
    while r.remaining:
        objects.append(_decode_block(r, headers_only))
    return AppFragment(control=control, function=function, iin=iin, objects=tuple(objects))


def block_octets(block: ObjectBlock) -> int:
    """Encoded size of one object block, for fragment packing."""
    q = block.qualifier
    base = 3
    if q == Qualifier.ALL_OBJECTS:
        return base
    codec = _CODECS.get((block.group, block.variation))
    size = codec.size if codec else 0
    if q in (Qualifier.START_STOP_1, Qualifier.START_STOP_2):
        width = 1 if q == Qualifier.START_STOP_1 else 2
        return base + 2 * width + size * len(block.values)
    if q in (Qualifier.COUNT_1_INDEX_1, Qualifier.COUNT_2_INDEX_2):
        width = 1 if q == Qualifier.COUNT_1_INDEX_1 else 2
        return base + width + (width + size) * len(block.values)
    if q == Qualifier.COUNT_1:
        return base + 1 + size * len(block.values)
    return base
