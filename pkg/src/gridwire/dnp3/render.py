"""One-line human-readable rendering of captured frames, for the CLI
``framedump`` subcommand and debug logging."""

from __future__ import annotations

from .app import AppFragment, ObjectBlock, decode_app_fragment
from .link import FrameScanner, LinkFrame
from .transport import TransportReassembler, TransportSegment


def _render_block(block: ObjectBlock) -> str:
    tag = f"g{block.group}v{block.variation}"
    if block.start is not None:
        rng = f"[{block.start}..{block.stop}]"
    elif block.indices:
        rng = "[" + ",".join(str(i) for i in block.indices) + "]"
    else:
        rng = "(all)" if not block.values else f"x{len(block.values)}"
    suffix = f" {len(block.values)} values" if block.values else ""
    return f"{tag}{rng}{suffix}"


def render_fragment(frame: LinkFrame, frag: AppFragment) -> str:
    direction = "M->O" if frame.is_from_master else "O->M"
    parts = [
        direction,
        f"{frame.source}->{frame.destination}",
        frag.function.name,
        f"seq={frag.control.sequence}",
    ]
    flags = "".join(
        name for name, on in (("C", frag.control.con), ("U", frag.control.uns)) if on
    )
    if flags:
        parts.append(f"flags={flags}")
    if frag.is_response:
        parts.append(f"iin=0x{int(frag.iin):04X}")
    parts.extend(_render_block(b) for b in frag.objects)
    return " ".join(parts)


def render_frame_line(frame: LinkFrame, note: str) -> str:
    direction = "M->O" if frame.is_from_master else "O->M"
    return f"{direction} {frame.source}->{frame.destination} {note}"


class FrameDumper:
    """Streams raw captured bytes into rendered lines.

    Keeps one transport reassembler per (source, destination) pair so
    multi-segment fragments render once, when complete.
    """

    def __init__(self):
        self._scanner = FrameScanner()
        self._reassembly: dict[tuple[int, int], TransportReassembler] = {}

    def feed(self, chunk: bytes) -> list[str]:
        lines = []
        for frame in self._scanner.feed(chunk):
            lines.extend(self._frame_lines(frame))
        return lines

    def _frame_lines(self, frame: LinkFrame) -> list[str]:
        if not frame.user_data:
            return [render_frame_line(frame, "link-only frame")]
        try:
            segment = TransportSegment.decode(frame.user_data)
            key = (frame.source, frame.destination)
            reassembler = self._reassembly.setdefault(key, TransportReassembler())
            app_bytes = reassembler.feed(segment)
            if app_bytes is None:
                return [
                    render_frame_line(
                        frame, f"transport seg={segment.sequence} ({len(segment.payload)} octets)"
                    )
                ]
            return [render_fragment(frame, decode_app_fragment(app_bytes))]
        except Exception as exc:  # undecodable capture content is reported, not fatal
            return [render_frame_line(frame, f"undecoded ({exc})")]
