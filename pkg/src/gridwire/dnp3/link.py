"""DNP3 link layer: CRC-blocked frames over a byte stream.

Frame layout::

    05 64 LEN CTRL DST(2,LE) SRC(2,LE) CRC(2) [16-octet block CRC(2)]...

LEN counts CTRL + addresses + user data (5 + len(user_data)) and excludes all
CRC octets.  User data is at most 250 octets, so a frame never exceeds
292 octets on the wire.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntFlag

from ..errors import CrcMismatchError, FrameError
from .crc import crc_bytes

LINK_SYNC = b"\x05\x64"
MAX_USER_DATA = 250
MAX_FRAME_OCTETS = 292
_BLOCK = 16


class LinkControl(IntFlag):
    """Control octet bits.  Low nibble is the link function code."""

    DIR = 0x80  # set on frames sent by the master station
    PRM = 0x40  # primary (initiating) message
    FCB = 0x20
    FCV = 0x10


LINK_FUNC_UNCONFIRMED = 0x04  # unconfirmed user data, the only function we send

# Control octets for the testbed's two roles.
CONTROL_FROM_MASTER = int(LinkControl.DIR | LinkControl.PRM) | LINK_FUNC_UNCONFIRMED
CONTROL_FROM_OUTSTATION = int(LinkControl.PRM) | LINK_FUNC_UNCONFIRMED


@dataclass(frozen=True)
class LinkFrame:
    destination: int
    source: int
    control: int = CONTROL_FROM_MASTER
    user_data: bytes = b""

    @property
    def is_from_master(self) -> bool:
        return bool(self.control & LinkControl.DIR)


def frame_octets(user_len: int) -> int:
    """Wire size of a frame carrying ``user_len`` payload octets."""
    blocks = (user_len + _BLOCK - 1) // _BLOCK
    return 10 + user_len + 2 * blocks


def encode_link_frame(frame: LinkFrame) -> bytes:
    if len(frame.user_data) > MAX_USER_DATA:
        raise FrameError(
            f"link payload {len(frame.user_data)} octets exceeds {MAX_USER_DATA}"
        )
    header = bytearray(LINK_SYNC)
    header.append(5 + len(frame.user_data))
    header.append(frame.control & 0xFF)
    header += frame.destination.to_bytes(2, "little")
    header += frame.source.to_bytes(2, "little")
    out = bytearray(header)
    out += crc_bytes(header)
    for i in range(0, len(frame.user_data), _BLOCK):
        block = frame.user_data[i : i + _BLOCK]
        out += block
        out += crc_bytes(block)
    return bytes(out)


def _find_sync(data: bytes) -> int:
    """Offset of the sync pair, or -1."""
    return data.find(LINK_SYNC)


def decode_link_frame(data: bytes) -> tuple[LinkFrame | None, int]:
    """Decode the first complete frame in ``data``.

    Returns ``(frame, consumed)`` on success, where ``consumed`` covers any
    garbage before the sync pair plus the whole frame.  Returns
    ``(None, consumed)`` when more bytes are needed; in that case only the
    leading garbage (if any) is consumed.  Raises :class:`CrcMismatchError`
    or :class:`FrameError` whose ``consumed`` drops the bad sync pair so the
    stream can resynchronize.
    """
    skip = _find_sync(data)
    if skip < 0:
        # Keep a trailing 0x05 in the buffer: it may be half a sync pair.
        keep = 1 if data.endswith(LINK_SYNC[:1]) else 0
        return None, len(data) - keep
    if len(data) - skip < 10:
        return None, skip
    header = data[skip : skip + 10]
    if crc_bytes(header[:8]) != header[8:10]:
        raise CrcMismatchError("link header CRC mismatch", consumed=skip + 2, skipped=skip)
    length = header[2]
    if length < 5:
        raise FrameError(
            f"link length field {length} below minimum 5", consumed=skip + 2, skipped=skip
        )
    user_len = length - 5
    total = frame_octets(user_len)
    if len(data) - skip < total:
        return None, skip
    user = bytearray()
    off = skip + 10
    remaining = user_len
    while remaining > 0:
        n = min(remaining, _BLOCK)
        block = data[off : off + n]
        if crc_bytes(block) != data[off + n : off + n + 2]:
            raise CrcMismatchError(
                f"link body CRC mismatch at offset {off - skip}",
                consumed=skip + 2,
                skipped=skip,
            )
        user += block
        off += n + 2
        remaining -= n
    frame = LinkFrame(
        destination=int.from_bytes(header[4:6], "little"),
        source=int.from_bytes(header[6:8], "little"),
        control=header[3],
        user_data=bytes(user),
    )
    return frame, skip + total


class FrameScanner:
    """Incremental decoder over a TCP byte stream.

    Feed received chunks, iterate decoded frames; CRC failures are dropped
    (counted) and the scanner resynchronizes on the next sync pair.
    """

    def __init__(self):
        self._buf = bytearray()
        self.crc_errors = 0
        self.garbage_octets = 0

    def feed(self, chunk: bytes) -> list[LinkFrame]:
        self._buf += chunk
        frames: list[LinkFrame] = []
        while True:
            try:
                frame, consumed = decode_link_frame(bytes(self._buf))
            except FrameError as exc:
                self.crc_errors += 1
                self.garbage_octets += exc.skipped
                del self._buf[: exc.consumed]
                continue
            if frame is None:
                self.garbage_octets += consumed
                del self._buf[:consumed]
                return frames
            del self._buf[:consumed]
            frames.append(frame)
