"""Length-prefixed frames with a stream id, emulating SCTP multi-streaming.

Frame layout: ``length:u32 | stream_id:u8 | payload`` (big-endian length of
the payload only). Stream 0 carries support procedures (setup, reset);
stream ``1 + k`` carries service procedures for RAN function ``k``.
"""

from __future__ import annotations

import struct

from ricsim.errors import InvalidField, OversizePayload, TruncatedFrame

HEADER_LEN = 5
MAX_PAYLOAD = (1 << 24) - 1
SUPPORT_STREAM = 0


def stream_for_function(function_id: int) -> int:
    """Stream id used for service traffic of ``function_id`` (wraps above 254)."""
    return 1 + function_id % 255


def frame_write(stream_id: int, payload: bytes) -> bytes:
    if not 0 <= stream_id <= 0xFF:
        raise InvalidField(f"stream_id {stream_id} outside 0..255")
    if len(payload) > MAX_PAYLOAD:
        raise OversizePayload(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack(">IB", len(payload), stream_id) + bytes(payload)


def frame_read(buf: bytes) -> tuple[int, bytes, bytes]:
    """Split one frame off the front of ``buf``.

    Returns ``(stream_id, payload, remainder)``. Raises TruncatedFrame when the
    buffer does not yet hold a whole frame; the caller should wait for more.
    """
    if len(buf) < HEADER_LEN:
        raise TruncatedFrame(f"have {len(buf)} of {HEADER_LEN} header bytes")
    length, stream_id = struct.unpack_from(">IB", buf)
    if length > MAX_PAYLOAD:
        raise OversizePayload(f"frame announces {length} payload bytes")
    end = HEADER_LEN + length
    if len(buf) < end:
        raise TruncatedFrame(f"have {len(buf) - HEADER_LEN} of {length} payload bytes")
    return stream_id, bytes(buf[HEADER_LEN:end]), bytes(buf[end:])


class FrameDecoder:
    """Incremental reassembly of frames from arbitrarily split byte chunks."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[tuple[int, bytes]]:
        self._buf += data
        frames = []
        pos = 0
        while len(self._buf) - pos >= HEADER_LEN:
            length, stream_id = struct.unpack_from(">IB", self._buf, pos)
            if length > MAX_PAYLOAD:
                raise OversizePayload(f"frame announces {length} payload bytes")
            end = pos + HEADER_LEN + length
            if end > len(self._buf):
                break
            frames.append((stream_id, bytes(self._buf[pos + HEADER_LEN:end])))
            pos = end
        del self._buf[:pos]
        return frames

    @property
    def pending(self) -> int:
        return len(self._buf)
