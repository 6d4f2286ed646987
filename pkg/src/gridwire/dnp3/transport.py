"""DNP3 transport function: segmentation of application fragments.

One transport octet (FIN | FIR | 6-bit sequence) leads each link payload,
leaving 249 octets of application data per segment.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import TransportError

SEGMENT_CAPACITY = 249  # 250-octet link payload minus the transport octet
_FIN = 0x80
_FIR = 0x40
_SEQ_MASK = 0x3F

DEFAULT_MAX_REASSEMBLED = 2048


@dataclass(frozen=True)
class TransportSegment:
    fir: bool
    fin: bool
    sequence: int  # 0..63
    payload: bytes

    def encode(self) -> bytes:
        octet = (self.sequence & _SEQ_MASK) | (_FIN if self.fin else 0) | (_FIR if self.fir else 0)
        return bytes((octet,)) + self.payload

    @classmethod
    def decode(cls, data: bytes) -> "TransportSegment":
        if not data:
            raise TransportError("empty transport segment")
        octet = data[0]
        return cls(
            fir=bool(octet & _FIR),
            fin=bool(octet & _FIN),
            sequence=octet & _SEQ_MASK,
            payload=data[1:],
        )


def transport_segment(app_bytes: bytes, seq0: int = 0) -> list[TransportSegment]:
    """Split an application fragment into transport segments.

    The first segment carries FIR, the last FIN, and the sequence number
    increments mod 64 from ``seq0``.
    """
    if not app_bytes:
        raise TransportError("cannot segment an empty application fragment")
    chunks = [app_bytes[i : i + SEGMENT_CAPACITY] for i in range(0, len(app_bytes), SEGMENT_CAPACITY)]
    segments = []
    for i, chunk in enumerate(chunks):
        segments.append(
            TransportSegment(
                fir=i == 0,
                fin=i == len(chunks) - 1,
                sequence=(seq0 + i) & _SEQ_MASK,
                payload=chunk,
            )
        )
    return segments


class TransportReassembler:
    """Per-session reassembly state.

    A FIR segment always starts a fresh buffer (restart replaces any partial
    assembly); a non-FIR segment outside the expected sequence, or with no
    assembly in progress, is dropped along with the partial buffer.
    """

    def __init__(self, max_fragment: int = DEFAULT_MAX_REASSEMBLED):
        self.max_fragment = max_fragment
        self._buf: bytearray | None = None
        self._next_seq = 0

    def feed(self, segment: TransportSegment) -> bytes | None:
        """Returns the completed application fragment, or None."""
        if segment.fir:
            self._buf = bytearray()
            self._next_seq = segment.sequence
        elif self._buf is None or segment.sequence != self._next_seq:
            self._buf = None
            return None
        assert self._buf is not None
        self._buf += segment.payload
        if len(self._buf) > self.max_fragment:
            self._buf = None
            raise TransportError(
                f"reassembled fragment exceeds {self.max_fragment} octets"
            )
        self._next_seq = (segment.sequence + 1) & _SEQ_MASK
        if segment.fin:
            out = bytes(self._buf)
            self._buf = None
            return out
        return None
