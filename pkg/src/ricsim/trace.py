"""Per-component record of E2AP procedures, mirrored to the ``ricsim.e2ap`` logger."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

log = logging.getLogger("ricsim.e2ap")


@dataclass(frozen=True)
class TraceEntry:
    t_ms: int
    who: str
    direction: str  # "tx" or "rx"
    pdu: str
    node: str
    request_id: str
    message: object = field(default=None, compare=False, repr=False)

    def __str__(self):
        return f"t={self.t_ms} {self.who} {self.direction} {self.pdu} node={self.node} req={self.request_id}"


class Transcript:
    def __init__(self, who: str, clock):
        self.who = who
        self.clock = clock
        self.entries: list[TraceEntry] = []

    def record(self, direction: str, pdu, node=None):
        rid = getattr(pdu, "request_id", None)
        entry = TraceEntry(self.clock.now_ms(), self.who, direction, type(pdu).__name__,
                           str(node) if node is not None else "-", str(rid) if rid is not None else "-", pdu)
        self.entries.append(entry)
        log.info("%s", entry)

    def names(self, direction: str | None = None) -> list[str]:
        return [e.pdu for e in self.entries if direction is None or e.direction == direction]

    def count(self, pdu_name: str, direction: str | None = None) -> int:
        return self.names(direction).count(pdu_name)
