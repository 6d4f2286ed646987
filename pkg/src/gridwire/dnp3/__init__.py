"""Byte-exact DNP3 link/transport/application codecs."""

from .app import (
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
from .crc import crc_bytes, crc_dnp, verify_block
from .link import (
    CONTROL_FROM_MASTER,
    CONTROL_FROM_OUTSTATION,
    FrameScanner,
    LinkFrame,
    decode_link_frame,
    encode_link_frame,
)
from .transport import TransportReassembler, TransportSegment, transport_segment
