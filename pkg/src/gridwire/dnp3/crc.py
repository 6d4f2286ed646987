"""DNP3 block CRC.

Polynomial x^16 + x^13 + x^12 + x^11 + x^10 + x^8 + x^6 + x^5 + x^2 + 1
(0x3D65), processed LSB-first (reflected form 0xA6BC), zero initial value,
final inversion.  The 2-octet checksum follows every 8-octet link header and
every 16-octet block of frame body, transmitted low octet first.
"""

from __future__ import annotations

_REFLECTED_POLY = 0xA6BC


def _build_table() -> tuple[int, ...]:
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ _REFLECTED_POLY if crc & 1 else crc >> 1
        table.append(crc)
    return tuple(table)


_TABLE = _build_table()


def crc_dnp(block: bytes | bytearray | memoryview) -> int:
    """Checksum of one header or body block (the octets before the CRC)."""
    crc = 0
    for octet in block:
        crc = (crc >> 8) ^ _TABLE[(crc ^ octet) & 0xFF]
    return crc ^ 0xFFFF


def crc_bytes(block: bytes | bytearray | memoryview) -> bytes:
    """Checksum as transmitted: low octet first."""
    crc = crc_dnp(block)
    return bytes((crc & 0xFF, crc >> 8))


def verify_block(block_with_crc: bytes | bytearray | memoryview) -> bool:
    """True when the trailing two octets match the CRC of the preceding ones."""
    if len(block_with_crc) < 3:
        return False
    data, trailer = block_with_crc[:-2], block_with_crc[-2:]
    return crc_bytes(data) == bytes(trailer)
