"""KPM-style service model payloads: periodic trigger, indication header, report.

The periodic trigger and the indication header are shared with the slicing
service model, whose REPORT service is configured the same way.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from ricsim.e2ap import RanFunctionItem, Reader, check_uint
from ricsim.errors import (
    DuplicateContainerId,
    InvalidField,
    MalformedIe,
    MissingContainer,
)

SM_NAME = "ORANSC-KPM"
FUNCTION_ID = 0
REVISION = 1
DEFAULT_QCI = 9


def function_item() -> RanFunctionItem:
    return RanFunctionItem(FUNCTION_ID, REVISION, SM_NAME, b"REPORT:periodic")


class ContainerType(enum.IntEnum):
    O_DU = 0
    O_CU_CP = 1
    O_CU_UP = 2


CONTAINER_LABELS = {ContainerType.O_DU: "O-DU", ContainerType.O_CU_CP: "O-CU-CP",
                    ContainerType.O_CU_UP: "O-CU-UP"}


@dataclass(frozen=True)
class KpmEventTrigger:
    period_ms: int


@dataclass(frozen=True)
class KpmIndicationHeader:
    plmn_id: bytes
    node_id: int
    timestamp_ms: int


@dataclass(frozen=True)
class QciStat:
    """Cumulative bytes of one UE session on one QCI since attach."""

    qci: int
    cum_dl_bytes: int
    cum_ul_bytes: int
    ue_id: int = 0


@dataclass(frozen=True)
class DuMetrics:
    prb_used_dl: int
    prb_used_ul: int
    prb_available: int


@dataclass(frozen=True)
class CuCpMetrics:
    active_ues: int


@dataclass(frozen=True)
class CuUpMetrics:
    stats: tuple[QciStat, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "stats", tuple(self.stats))


_METRIC_TYPES = {ContainerType.O_DU: DuMetrics, ContainerType.O_CU_CP: CuCpMetrics,
                 ContainerType.O_CU_UP: CuUpMetrics}


@dataclass(frozen=True)
class KpmContainer:
    container_type: ContainerType
    container_id: int
    metrics: DuMetrics | CuCpMetrics | CuUpMetrics


@dataclass(frozen=True)
class KpmReport:
    containers: tuple[KpmContainer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "containers", tuple(self.containers))

    def container(self, ctype: ContainerType) -> KpmContainer:
        for c in self.containers:
            if c.container_type == ctype:
                return c
        raise MissingContainer(CONTAINER_LABELS[ctype])


# --- trigger ---------------------------------------------------------------------

def encode_trigger(t: KpmEventTrigger) -> bytes:
    check_uint("period_ms", t.period_ms, 32)
    if t.period_ms < 1:
        raise InvalidField("period_ms must be >= 1")
    return struct.pack(">I", t.period_ms)


def decode_trigger(buf: bytes) -> KpmEventTrigger:
    r = Reader(buf)
    period = r.u32()
    r.done()
    if period < 1:
        raise MalformedIe("period_ms must be >= 1")
    return KpmEventTrigger(period)


# --- header ----------------------------------------------------------------------

def encode_header(h: KpmIndicationHeader) -> bytes:
    if len(h.plmn_id) != 3:
        raise InvalidField("plmn_id must be 3 octets")
    return bytes(h.plmn_id) + struct.pack(">IQ", check_uint("node_id", h.node_id, 32),
                                          check_uint("timestamp_ms", h.timestamp_ms, 64))


def decode_header(buf: bytes) -> KpmIndicationHeader:
    r = Reader(buf)
    h = KpmIndicationHeader(r.take(3), r.u32(), r.u64())
    r.done()
    return h


# --- report ----------------------------------------------------------------------

def _validate_report(report: KpmReport):
    ids = [c.container_id for c in report.containers]
    if len(set(ids)) != len(ids):
        raise DuplicateContainerId(f"container ids {ids}")
    present = [c.container_type for c in report.containers]
    for ctype in ContainerType:
        if present.count(ctype) != 1:
            raise MissingContainer(f"need exactly one {CONTAINER_LABELS[ctype]} container")
    if len(present) != len(ContainerType):
        raise MissingContainer("report must hold exactly three containers")
    du = report.container(ContainerType.O_DU).metrics
    if du.prb_used_dl > du.prb_available or du.prb_used_ul > du.prb_available:
        raise InvalidField("PRB usage above available PRBs")


def _encode_body(c: KpmContainer) -> bytes:
    m = c.metrics
    if not isinstance(m, _METRIC_TYPES[ContainerType(c.container_type)]):
        raise InvalidField(f"{CONTAINER_LABELS[c.container_type]} container holds {type(m).__name__}")
    if isinstance(m, DuMetrics):
        return struct.pack(">HHH", *(check_uint(n, getattr(m, n), 16)
                                     for n in ("prb_used_dl", "prb_used_ul", "prb_available")))
    if isinstance(m, CuCpMetrics):
        return struct.pack(">H", check_uint("active_ues", m.active_ues, 16))
    out = bytearray(struct.pack(">H", check_uint("stat count", len(m.stats), 16)))
    for s in m.stats:
        out += struct.pack(">BIQQ", check_uint("qci", s.qci, 8), check_uint("ue_id", s.ue_id, 32),
                           check_uint("cum_dl_bytes", s.cum_dl_bytes, 64),
                           check_uint("cum_ul_bytes", s.cum_ul_bytes, 64))
    return bytes(out)


def _decode_body(ctype: ContainerType, r: Reader):
    if ctype == ContainerType.O_DU:
        return DuMetrics(r.u16(), r.u16(), r.u16())
    if ctype == ContainerType.O_CU_CP:
        return CuCpMetrics(r.u16())
    stats = []
    for _ in range(r.u16()):
        qci, ue_id, dl, ul = r.u8(), r.u32(), r.u64(), r.u64()
        stats.append(QciStat(qci, dl, ul, ue_id))
    return CuUpMetrics(tuple(stats))


def encode_report(report: KpmReport) -> bytes:
    """Layout: ``count:u8`` then per container ``type:u8 id:u8 len:u16 body``."""
    _validate_report(report)
    out = bytearray([len(report.containers)])
    for c in report.containers:
        body = _encode_body(c)
        out += struct.pack(">BBH", int(c.container_type), check_uint("container_id", c.container_id, 8),
                           len(body))
        out += body
    return bytes(out)


def decode_report(buf: bytes) -> KpmReport:
    r = Reader(buf)
    containers = []
    for _ in range(r.u8()):
        ctype, cid = r.u8(), r.u8()
        try:
            ctype = ContainerType(ctype)
        except ValueError:
            raise MalformedIe(f"unknown container type {ctype}") from None
        body = Reader(r.lp_bytes())
        metrics = _decode_body(ctype, body)
        body.done()
        containers.append(KpmContainer(ctype, cid, metrics))
    r.done()
    report = KpmReport(tuple(containers))
    try:
        _validate_report(report)
    except InvalidField as exc:
        raise MalformedIe(str(exc)) from None
    return report


def build_report(snapshot) -> KpmReport:
    """Package a RAN snapshot into the three O-DU / O-CU-CP / O-CU-UP containers."""
    return KpmReport((
        KpmContainer(ContainerType.O_DU, 1, DuMetrics(snapshot.prb_used_dl, snapshot.prb_used_ul,
                                                      snapshot.prb_available)),
        KpmContainer(ContainerType.O_CU_CP, 2, CuCpMetrics(snapshot.active_ues)),
        KpmContainer(ContainerType.O_CU_UP, 3, CuUpMetrics(tuple(
            QciStat(s.qci, s.cum_dl_bytes, s.cum_ul_bytes, s.ue_id) for s in snapshot.sessions))),
    ))

