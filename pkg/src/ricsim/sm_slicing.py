"""Slicing service model: CONTROL commands and per-slice REPORT payloads."""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from ricsim.e2ap import RanFunctionItem, Reader, check_uint, pack_str, unpack_str
from ricsim.errors import DuplicateSliceId, InvalidField, MalformedIe, ShareSumExceeded

SM_NAME = "ORANSC-SLICE"
FUNCTION_ID = 1
REVISION = 1
SLICE_NAME_MAX = 32
DEFAULT_SLICE_ID = 255  # reserved for the implicit slice used before any slice exists


def function_item() -> RanFunctionItem:
    return RanFunctionItem(FUNCTION_ID, REVISION, SM_NAME, b"REPORT:periodic;CONTROL:slice")


@dataclass(frozen=True)
class SliceShare:
    slice_id: int
    share_percent: int


@dataclass(frozen=True)
class CreateSlice:
    slice_id: int
    name: str


@dataclass(frozen=True)
class BindUe:
    ue_id: int
    slice_id: int


@dataclass(frozen=True)
class ConfigureShares:
    shares: tuple[SliceShare, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "shares", tuple(self.shares))


SliceControl = CreateSlice | BindUe | ConfigureShares


class ShareViolation(enum.Enum):
    DUPLICATE_SLICE_ID = "duplicate-slice-id"
    SHARE_SUM_EXCEEDED = "share-sum-exceeded"


def validate_shares(shares) -> ShareViolation | None:
    """Return None when ids are unique and percents sum to at most 100."""
    ids = [s.slice_id for s in shares]
    if len(set(ids)) != len(ids):
        return ShareViolation.DUPLICATE_SLICE_ID
    if sum(s.share_percent for s in shares) > 100:
        return ShareViolation.SHARE_SUM_EXCEEDED
    return None


def check_shares(shares):
    violation = validate_shares(shares)
    if violation is ShareViolation.DUPLICATE_SLICE_ID:
        raise DuplicateSliceId(f"slice ids {[s.slice_id for s in shares]}")
    if violation is ShareViolation.SHARE_SUM_EXCEEDED:
        raise ShareSumExceeded(f"shares sum to {sum(s.share_percent for s in shares)}%")


class _Cmd(enum.IntEnum):
    CREATE_SLICE = 1
    BIND_UE = 2
    CONFIGURE_SHARES = 3


def encode_control(cmd: SliceControl) -> bytes:
    if isinstance(cmd, CreateSlice):
        return (bytes([_Cmd.CREATE_SLICE, check_uint("slice_id", cmd.slice_id, 8)])
                + pack_str("name", cmd.name, SLICE_NAME_MAX))
    if isinstance(cmd, BindUe):
        return struct.pack(">BIB", _Cmd.BIND_UE, check_uint("ue_id", cmd.ue_id, 32),
                           check_uint("slice_id", cmd.slice_id, 8))
    if isinstance(cmd, ConfigureShares):
        for s in cmd.shares:
            check_uint("slice_id", s.slice_id, 8)
            check_uint("share_percent", s.share_percent, 8, 100)
        check_shares(cmd.shares)
        return bytes([_Cmd.CONFIGURE_SHARES, len(cmd.shares)]) + b"".join(
            bytes([s.slice_id, s.share_percent]) for s in cmd.shares)
    raise InvalidField(f"not a slice control command: {cmd!r}")


def decode_control(buf: bytes) -> SliceControl:
    r = Reader(buf)
    kind = r.u8()
    if kind == _Cmd.CREATE_SLICE:
        cmd = CreateSlice(r.u8(), unpack_str(r, "name", SLICE_NAME_MAX))
    elif kind == _Cmd.BIND_UE:
        cmd = BindUe(r.u32(), r.u8())
    elif kind == _Cmd.CONFIGURE_SHARES:
        shares = tuple(SliceShare(r.u8(), r.u8()) for _ in range(r.u8()))
        if any(s.share_percent > 100 for s in shares):
            raise ShareSumExceeded("a single share above 100%")
        check_shares(shares)
        cmd = ConfigureShares(shares)
    else:
        raise MalformedIe(f"unknown slice command {kind}")
    r.done()
    return cmd


@dataclass(frozen=True)
class SliceRecord:
    slice_id: int
    subframes_allocated_in_period: int
    cum_dl_bytes: int
    throughput_bps_in_period: int


@dataclass(frozen=True)
class SliceReport:
    records: tuple[SliceRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))


def encode_slice_report(report: SliceReport) -> bytes:
    ids = [rec.slice_id for rec in report.records]
    if len(set(ids)) != len(ids):
        raise DuplicateSliceId(f"slice ids {ids}")
    out = bytearray([check_uint("record count", len(report.records), 8)])
    for rec in report.records:
        out += struct.pack(">BIQQ", check_uint("slice_id", rec.slice_id, 8),
                           check_uint("subframes", rec.subframes_allocated_in_period, 32),
                           check_uint("cum_dl_bytes", rec.cum_dl_bytes, 64),
                           check_uint("throughput", rec.throughput_bps_in_period, 64))
    return bytes(out)


def decode_slice_report(buf: bytes) -> SliceReport:
    r = Reader(buf)
    records = tuple(SliceRecord(r.u8(), r.u32(), r.u64(), r.u64()) for _ in range(r.u8()))
    r.done()
    ids = [rec.slice_id for rec in records]
    if len(set(ids)) != len(ids):
        raise DuplicateSliceId(f"slice ids {ids}")
    return SliceReport(records)


def build_slice_report(snapshot) -> SliceReport:
    return SliceReport(tuple(
        SliceRecord(s.slice_id, s.subframes_allocated, s.cum_dl_bytes, s.throughput_bps)
        for s in snapshot.slices))
