"""E2AP message types and their canonical TLV wire encoding.

A PDU is one tag octet followed by information elements, each written as
``ie_id:u16 | length:u16 | value`` (big-endian), sorted ascending by IE id.
List-valued fields with variable-size items repeat the same IE id once per
item, in list order. The tag and IE tables live in ``docs/wire-format.md``.
"""

from __future__ import annotations

import dataclasses
import enum
import struct
from dataclasses import dataclass
from typing import Any, ClassVar

from ricsim.errors import (
    InvalidField,
    MalformedIe,
    MissingMandatoryIe,
    OversizeField,
    TrailingGarbage,
    TruncatedBuffer,
    UnknownPduTag,
)

SM_NAME_MAX = 64
DEFINITION_MAX = 4096
IE_VALUE_MAX = 0xFFFF
NODE_ID_BITS = 20


class NodeType(enum.IntEnum):
    ENB = 0
    GNB = 1
    EN_GNB = 2


class ActionType(enum.IntEnum):
    REPORT = 0
    INSERT = 1
    CONTROL = 2
    POLICY = 3


class CauseCategory(enum.IntEnum):
    RIC_REQUEST = 0
    RIC_SERVICE = 1
    TRANSPORT = 2
    PROTOCOL = 3
    MISC = 4


class ControlOutcome(enum.IntEnum):
    ACK = 0
    FAILURE = 1
    NO_ACK = 2


# --- identities ---------------------------------------------------------------

def plmn_from_str(text: str) -> bytes:
    """Pack ``"MCC/MNC"`` (e.g. ``"001/01"``) into the 3-octet BCD PLMN identity."""
    try:
        mcc, mnc = (part.strip() for part in text.split("/"))
    except ValueError:
        raise InvalidField(f"PLMN must look like MCC/MNC, got {text!r}") from None
    if len(mcc) != 3 or len(mnc) not in (2, 3) or not (mcc + mnc).isdigit():
        raise InvalidField(f"bad PLMN {text!r}")
    d = [int(c) for c in mcc]
    m = [int(c) for c in mnc]
    mnc3 = m[2] if len(m) == 3 else 0xF
    return bytes([(d[1] << 4) | d[0], (mnc3 << 4) | d[2], (m[1] << 4) | m[0]])


def plmn_to_str(plmn: bytes) -> str:
    if len(plmn) != 3:
        raise InvalidField("PLMN id must be 3 octets")
    digits = [plmn[0] & 0xF, plmn[0] >> 4, plmn[1] & 0xF]
    mnc = [plmn[2] & 0xF, plmn[2] >> 4]
    if plmn[1] >> 4 != 0xF:
        mnc.append(plmn[1] >> 4)
    return "".join(map(str, digits)) + "/" + "".join(map(str, mnc))


@dataclass(frozen=True)
class GlobalE2NodeId:
    plmn_id: bytes
    node_type: NodeType
    node_id: int

    def __str__(self):
        try:
            plmn = plmn_to_str(self.plmn_id)
        except (InvalidField, ValueError):
            plmn = self.plmn_id.hex()
        return f"{plmn}/{NodeType(self.node_type).name}/{self.node_id}"


@dataclass(frozen=True)
class RanFunctionItem:
    function_id: int
    revision: int
    sm_name: str
    definition: bytes = b""


@dataclass(frozen=True)
class RicRequestId:
    requestor_id: int
    instance_id: int

    def __str__(self):
        return f"{self.requestor_id}:{self.instance_id}"


@dataclass(frozen=True)
class Cause:
    category: CauseCategory
    code: int

    def __str__(self):
        name = CAUSE_NAMES.get((self.category, self.code), str(self.code))
        return f"{CauseCategory(self.category).name}/{name}"


@dataclass(frozen=True)
class RicAction:
    action_id: int
    action_type: ActionType
    definition: bytes = b""


# Cause codes, per category. Code 0 is "unspecified" everywhere.
CAUSE_UNSPECIFIED_MISC = Cause(CauseCategory.MISC, 0)
CAUSE_UNAUTHORIZED = Cause(CauseCategory.MISC, 1)
CAUSE_OM_RESET = Cause(CauseCategory.MISC, 2)
CAUSE_DUPLICATE_REQUEST_ID = Cause(CauseCategory.RIC_REQUEST, 1)
CAUSE_UNKNOWN_NODE = Cause(CauseCategory.RIC_REQUEST, 2)
CAUSE_UNKNOWN_XAPP = Cause(CauseCategory.RIC_REQUEST, 3)
CAUSE_ACTION_NOT_SUPPORTED = Cause(CauseCategory.RIC_REQUEST, 4)
CAUSE_FUNCTION_NOT_SUPPORTED = Cause(CauseCategory.RIC_SERVICE, 1)
CAUSE_SHARE_SUM_EXCEEDED = Cause(CauseCategory.RIC_SERVICE, 2)
CAUSE_DUPLICATE_SLICE_ID = Cause(CauseCategory.RIC_SERVICE, 3)
CAUSE_UNKNOWN_SLICE = Cause(CauseCategory.RIC_SERVICE, 4)
CAUSE_MALFORMED_SM_PAYLOAD = Cause(CauseCategory.RIC_SERVICE, 5)
CAUSE_TIMEOUT = Cause(CauseCategory.TRANSPORT, 1)
CAUSE_CONNECTION_LOST = Cause(CauseCategory.TRANSPORT, 2)
CAUSE_MALFORMED_TRIGGER = Cause(CauseCategory.PROTOCOL, 1)
CAUSE_DUPLICATE_NODE = Cause(CauseCategory.PROTOCOL, 2)
CAUSE_UNEXPECTED_MESSAGE = Cause(CauseCategory.PROTOCOL, 3)

CAUSE_NAMES = {
    (CauseCategory.MISC, 1): "unauthorized",
    (CauseCategory.MISC, 2): "om-reset",
    (CauseCategory.RIC_REQUEST, 1): "duplicate-request-id",
    (CauseCategory.RIC_REQUEST, 2): "unknown-node",
    (CauseCategory.RIC_REQUEST, 3): "unknown-xapp",
    (CauseCategory.RIC_REQUEST, 4): "action-not-supported",
    (CauseCategory.RIC_SERVICE, 1): "function-not-supported",
    (CauseCategory.RIC_SERVICE, 2): "share-sum-exceeded",
    (CauseCategory.RIC_SERVICE, 3): "duplicate-slice-id",
    (CauseCategory.RIC_SERVICE, 4): "unknown-slice",
    (CauseCategory.RIC_SERVICE, 5): "malformed-payload",
    (CauseCategory.TRANSPORT, 1): "timeout",
    (CauseCategory.TRANSPORT, 2): "connection-lost",
    (CauseCategory.PROTOCOL, 1): "malformed-trigger",
    (CauseCategory.PROTOCOL, 2): "duplicate-node",
    (CauseCategory.PROTOCOL, 3): "unexpected-message",
}


# --- byte-level helpers ---------------------------------------------------------

class Reader:
    """Cursor over a byte string; every short read raises TruncatedBuffer."""

    def __init__(self, buf: bytes):
        self.buf = bytes(buf)
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedBuffer(f"need {n} bytes at offset {self.pos}, have {len(self.buf) - self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def lp_bytes(self) -> bytes:
        return self.take(self.u16())

    def remaining(self) -> int:
        return len(self.buf) - self.pos

    def done(self):
        if self.pos != len(self.buf):
            raise TrailingGarbage(f"{len(self.buf) - self.pos} unexpected trailing bytes")


def check_uint(name: str, value: Any, bits: int, limit: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidField(f"{name} must be an integer, got {value!r}")
    top = (1 << bits) - 1 if limit is None else limit
    if not 0 <= value <= top:
        raise InvalidField(f"{name}={value} outside 0..{top}")
    return value


def check_bytes(name: str, value: Any, limit: int) -> bytes:
    if not isinstance(value, (bytes, bytearray)):
        raise InvalidField(f"{name} must be bytes")
    if len(value) > limit:
        raise OversizeField(f"{name} is {len(value)} bytes, limit {limit}")
    return bytes(value)


def pack_lp(name: str, value: bytes, limit: int = IE_VALUE_MAX) -> bytes:
    value = check_bytes(name, value, limit)
    return struct.pack(">H", len(value)) + value


def pack_str(name: str, value: str, limit: int) -> bytes:
    if not isinstance(value, str):
        raise InvalidField(f"{name} must be a string")
    return pack_lp(name, value.encode("utf-8"), limit)


def unpack_str(r: Reader, name: str, limit: int) -> str:
    raw = r.lp_bytes()
    if len(raw) > limit:
        raise MalformedIe(f"{name} longer than {limit} bytes")
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedIe(f"{name} is not valid UTF-8") from None


def pack_node_id(n: GlobalE2NodeId) -> bytes:
    if not isinstance(n, GlobalE2NodeId):
        raise InvalidField("expected GlobalE2NodeId")
    plmn = check_bytes("plmn_id", n.plmn_id, 3)
    if len(plmn) != 3:
        raise InvalidField("plmn_id must be exactly 3 octets")
    if n.node_type not in NodeType.__members__.values():
        raise InvalidField(f"node_type {n.node_type!r}")
    check_uint("node_id", n.node_id, 32, (1 << NODE_ID_BITS) - 1)
    return plmn + struct.pack(">BI", int(n.node_type), n.node_id)


def unpack_node_id(r: Reader) -> GlobalE2NodeId:
    plmn = r.take(3)
    node_type = r.u8()
    node_id = r.u32()
    try:
        node_type = NodeType(node_type)
    except ValueError:
        raise MalformedIe(f"unknown node type {node_type}") from None
    if node_id >= 1 << NODE_ID_BITS:
        raise MalformedIe(f"node_id {node_id} wider than {NODE_ID_BITS} bits")
    return GlobalE2NodeId(plmn, node_type, node_id)


def pack_cause(c: Cause) -> bytes:
    if not isinstance(c, Cause) or c.category not in CauseCategory.__members__.values():
        raise InvalidField(f"bad cause {c!r}")
    return bytes([int(c.category), check_uint("cause.code", c.code, 8)])


def unpack_cause(r: Reader) -> Cause:
    cat, code = r.u8(), r.u8()
    try:
        return Cause(CauseCategory(cat), code)
    except ValueError:
        raise MalformedIe(f"unknown cause category {cat}") from None


# --- IE kinds -------------------------------------------------------------------

class _Kind:
    """Packs one IE value; ``unpack`` gets a Reader over exactly that value."""

    def pack(self, name, value) -> bytes:
        raise NotImplementedError

    def unpack(self, r: Reader):
        raise NotImplementedError


class _UInt(_Kind):
    def __init__(self, bits, limit=None):
        self.bits, self.limit = bits, limit
        self.fmt = {8: ">B", 16: ">H", 32: ">I", 64: ">Q"}[bits]

    def pack(self, name, value):
        return struct.pack(self.fmt, check_uint(name, value, self.bits, self.limit))

    def unpack(self, r):
        v = {8: r.u8, 16: r.u16, 32: r.u32, 64: r.u64}[self.bits]()
        if self.limit is not None and v > self.limit:
            raise MalformedIe(f"value {v} above {self.limit}")
        return v


class _Bool(_Kind):
    def pack(self, name, value):
        if not isinstance(value, bool):
            raise InvalidField(f"{name} must be bool")
        return b"\x01" if value else b"\x00"

    def unpack(self, r):
        v = r.u8()
        if v > 1:
            raise MalformedIe(f"boolean octet {v}")
        return v == 1


class _Opaque(_Kind):
    def __init__(self, limit=IE_VALUE_MAX):
        self.limit = limit

    def pack(self, name, value):
        return check_bytes(name, value, self.limit)

    def unpack(self, r):
        return r.take(r.remaining())


class _Str(_Kind):
    def __init__(self, limit):
        self.limit = limit

    def pack(self, name, value):
        if not isinstance(value, str):
            raise InvalidField(f"{name} must be a string")
        return check_bytes(name, value.encode("utf-8"), self.limit)

    def unpack(self, r):
        raw = r.take(r.remaining())
        if len(raw) > self.limit:
            raise MalformedIe(f"string longer than {self.limit}")
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedIe("string is not valid UTF-8") from None


class _IntList(_Kind):
    """Packed list of fixed-width unsigned ints in a single IE."""

    def __init__(self, bits, limit=None):
        self.item = _UInt(bits, limit)
        self.width = bits // 8

    def pack(self, name, value):
        return b"".join(self.item.pack(name, v) for v in value)

    def unpack(self, r):
        if r.remaining() % self.width:
            raise MalformedIe("packed integer list has a partial item")
        out = []
        while r.remaining():
            out.append(self.item.unpack(r))
        return tuple(out)


class _Struct(_Kind):
    def __init__(self, pack, unpack):
        self._pack, self._unpack = pack, unpack

    def pack(self, name, value):
        return self._pack(value)

    def unpack(self, r):
        return self._unpack(r)


def _pack_function(f: RanFunctionItem) -> bytes:
    if not isinstance(f, RanFunctionItem):
        raise InvalidField("expected RanFunctionItem")
    return (struct.pack(">HH", check_uint("function_id", f.function_id, 16, 4095),
                        check_uint("revision", f.revision, 16))
            + pack_str("sm_name", f.sm_name, SM_NAME_MAX)
            + pack_lp("definition", f.definition, DEFINITION_MAX))


def _unpack_function(r: Reader) -> RanFunctionItem:
    fid, rev = r.u16(), r.u16()
    if fid > 4095:
        raise MalformedIe(f"function_id {fid} above 4095")
    name = unpack_str(r, "sm_name", SM_NAME_MAX)
    definition = r.lp_bytes()
    if len(definition) > DEFINITION_MAX:
        raise MalformedIe("function definition too long")
    return RanFunctionItem(fid, rev, name, definition)


def _pack_action(a: RicAction) -> bytes:
    if not isinstance(a, RicAction) or a.action_type not in ActionType.__members__.values():
        raise InvalidField(f"bad action {a!r}")
    return (bytes([check_uint("action_id", a.action_id, 8), int(a.action_type)])
            + pack_lp("action_definition", a.definition, IE_VALUE_MAX - 4))


def _unpack_action(r: Reader) -> RicAction:
    aid, atype = r.u8(), r.u8()
    try:
        atype = ActionType(atype)
    except ValueError:
        raise MalformedIe(f"unknown action type {atype}") from None
    return RicAction(aid, atype, r.lp_bytes())


def _pack_request_id(rid: RicRequestId) -> bytes:
    if not isinstance(rid, RicRequestId):
        raise InvalidField("expected RicRequestId")
    return struct.pack(">HH", check_uint("requestor_id", rid.requestor_id, 16),
                       check_uint("instance_id", rid.instance_id, 16))


def _unpack_request_id(r: Reader) -> RicRequestId:
    return RicRequestId(r.u16(), r.u16())


@dataclass(frozen=True)
class SdlItem:
    key: str
    value: bytes
    version: int


def _pack_sdl_item(item: SdlItem) -> bytes:
    return (pack_str("key", item.key, 1024) + struct.pack(">Q", check_uint("version", item.version, 64))
            + pack_lp("value", item.value, IE_VALUE_MAX - 1024 - 12))


def _unpack_sdl_item(r: Reader) -> SdlItem:
    key = unpack_str(r, "key", 1024)
    version = r.u64()
    return SdlItem(key, r.lp_bytes(), version)


@dataclass(frozen=True)
class IeDef:
    ie_id: int
    name: str
    kind: _Kind
    repeated: bool = False


_IE_DEFS = [
    IeDef(0x0001, "GlobalE2NodeId", _Struct(pack_node_id, unpack_node_id)),
    IeDef(0x0002, "RanFunctionItem", _Struct(_pack_function, _unpack_function), repeated=True),
    IeDef(0x0003, "RanFunctionIdList", _IntList(16, 4095)),
    IeDef(0x0004, "Cause", _Struct(pack_cause, unpack_cause)),
    IeDef(0x0005, "RicRequestId", _Struct(_pack_request_id, _unpack_request_id)),
    IeDef(0x0006, "RanFunctionId", _UInt(16, 4095)),
    IeDef(0x0007, "RicEventTrigger", _Opaque()),
    IeDef(0x0008, "RicActionToBeSetup", _Struct(_pack_action, _unpack_action), repeated=True),
    IeDef(0x0009, "RicActionIdList", _IntList(8)),
    IeDef(0x000A, "RicActionId", _UInt(8)),
    IeDef(0x000B, "RicIndicationSn", _UInt(32)),
    IeDef(0x000C, "RicIndicationHeader", _Opaque()),
    IeDef(0x000D, "RicIndicationMessage", _Opaque()),
    IeDef(0x000E, "RicControlHeader", _Opaque()),
    IeDef(0x000F, "RicControlMessage", _Opaque()),
    IeDef(0x0010, "RicControlAckRequest", _Bool()),
    # RIC-internal xApp link
    IeDef(0x0100, "XappName", _Str(SM_NAME_MAX)),
    IeDef(0x0101, "Token", _UInt(32)),
    IeDef(0x0102, "ControlOutcome", _UInt(8, max(ControlOutcome))),
    IeDef(0x0103, "SdlNamespace", _Str(256)),
    IeDef(0x0104, "SdlKey", _Str(1024)),
    IeDef(0x0105, "SdlValue", _Opaque()),
    IeDef(0x0106, "SdlVersion", _UInt(64)),
    IeDef(0x0107, "SdlItem", _Struct(_pack_sdl_item, _unpack_sdl_item), repeated=True),
    IeDef(0x0108, "Found", _Bool()),
]
IE_TABLE = {d.ie_id: d for d in _IE_DEFS}
IE_BY_NAME = {d.name: d for d in _IE_DEFS}


# --- PDUs -----------------------------------------------------------------------

PDU_TYPES: dict[int, type] = {}


def _pdu(tag):
    def register(cls):
        cls = dataclass(frozen=True)(cls)
        cls.TAG = tag
        if tag in PDU_TYPES:
            raise RuntimeError(f"duplicate PDU tag {tag:#x}")
        PDU_TYPES[tag] = cls
        return cls
    return register


class Pdu:
    """Base for every message. ``FIELDS`` maps attribute -> IE name.

    Fields named in ``OPTIONAL`` may be None and are then omitted on the wire.
    Repeated IEs are always optional (absent means an empty tuple).
    """

    TAG: ClassVar[int]
    FIELDS: ClassVar[dict[str, str]] = {}
    OPTIONAL: ClassVar[frozenset[str]] = frozenset()

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                object.__setattr__(self, f.name, tuple(v))

    @property
    def name(self) -> str:
        return type(self).__name__


@_pdu(0x01)
class E2SetupRequest(Pdu):
    node_id: GlobalE2NodeId
    functions: tuple[RanFunctionItem, ...] = ()
    FIELDS = {"node_id": "GlobalE2NodeId", "functions": "RanFunctionItem"}


@_pdu(0x02)
class E2SetupResponse(Pdu):
    accepted_function_ids: tuple[int, ...] = ()
    FIELDS = {"accepted_function_ids": "RanFunctionIdList"}


@_pdu(0x03)
class E2SetupFailure(Pdu):
    cause: Cause
    FIELDS = {"cause": "Cause"}


@_pdu(0x04)
class ResetRequest(Pdu):
    cause: Cause
    FIELDS = {"cause": "Cause"}


@_pdu(0x05)
class ResetResponse(Pdu):
    FIELDS = {}


@_pdu(0x10)
class RicSubscriptionRequest(Pdu):
    request_id: RicRequestId
    function_id: int
    event_trigger: bytes
    actions: tuple[RicAction, ...] = ()
    FIELDS = {"request_id": "RicRequestId", "function_id": "RanFunctionId",
              "event_trigger": "RicEventTrigger", "actions": "RicActionToBeSetup"}


@_pdu(0x11)
class RicSubscriptionResponse(Pdu):
    request_id: RicRequestId
    admitted_action_ids: tuple[int, ...] = ()
    FIELDS = {"request_id": "RicRequestId", "admitted_action_ids": "RicActionIdList"}


@_pdu(0x12)
class RicSubscriptionFailure(Pdu):
    request_id: RicRequestId
    cause: Cause
    FIELDS = {"request_id": "RicRequestId", "cause": "Cause"}


@_pdu(0x20)
class RicIndication(Pdu):
    request_id: RicRequestId
    function_id: int
    action_id: int
    sequence_number: int
    header: bytes
    message: bytes
    FIELDS = {"request_id": "RicRequestId", "function_id": "RanFunctionId",
              "action_id": "RicActionId", "sequence_number": "RicIndicationSn",
              "header": "RicIndicationHeader", "message": "RicIndicationMessage"}


@_pdu(0x30)
class RicControlRequest(Pdu):
    request_id: RicRequestId
    function_id: int
    header: bytes
    message: bytes
    ack_requested: bool
    FIELDS = {"request_id": "RicRequestId", "function_id": "RanFunctionId",
              "header": "RicControlHeader", "message": "RicControlMessage",
              "ack_requested": "RicControlAckRequest"}


@_pdu(0x31)
class RicControlAck(Pdu):
    request_id: RicRequestId
    FIELDS = {"request_id": "RicRequestId"}


@_pdu(0x32)
class RicControlFailure(Pdu):
    request_id: RicRequestId
    cause: Cause
    FIELDS = {"request_id": "RicRequestId", "cause": "Cause"}


# RIC-internal xApp link. Indications are forwarded to xApps as RicIndication PDUs.

@_pdu(0x40)
class XappRegister(Pdu):
    xapp_name: str
    FIELDS = {"xapp_name": "XappName"}


@_pdu(0x41)
class XappRegisterAck(Pdu):
    xapp_name: str
    FIELDS = {"xapp_name": "XappName"}


@_pdu(0x42)
class XappSubscribe(Pdu):
    token: int
    node_id: GlobalE2NodeId
    function_id: int
    event_trigger: bytes
    actions: tuple[RicAction, ...] = ()
    FIELDS = {"token": "Token", "node_id": "GlobalE2NodeId", "function_id": "RanFunctionId",
              "event_trigger": "RicEventTrigger", "actions": "RicActionToBeSetup"}


@_pdu(0x43)
class XappSubscribeResult(Pdu):
    """Either ``admitted_action_ids`` (success) or ``cause`` (failure) is set."""

    token: int
    request_id: RicRequestId | None = None
    admitted_action_ids: tuple[int, ...] | None = None
    cause: Cause | None = None
    FIELDS = {"token": "Token", "request_id": "RicRequestId",
              "admitted_action_ids": "RicActionIdList", "cause": "Cause"}
    OPTIONAL = frozenset({"request_id", "admitted_action_ids", "cause"})


@_pdu(0x44)
class XappControl(Pdu):
    token: int
    node_id: GlobalE2NodeId
    function_id: int
    header: bytes
    message: bytes
    ack_requested: bool
    FIELDS = {"token": "Token", "node_id": "GlobalE2NodeId", "function_id": "RanFunctionId",
              "header": "RicControlHeader", "message": "RicControlMessage",
              "ack_requested": "RicControlAckRequest"}


@_pdu(0x45)
class XappControlResult(Pdu):
    token: int
    outcome: int
    cause: Cause | None = None
    FIELDS = {"token": "Token", "outcome": "ControlOutcome", "cause": "Cause"}
    OPTIONAL = frozenset({"cause"})


@_pdu(0x46)
class XappSdlGet(Pdu):
    token: int
    namespace: str
    key: str
    FIELDS = {"token": "Token", "namespace": "SdlNamespace", "key": "SdlKey"}


@_pdu(0x47)
class XappSdlGetResult(Pdu):
    token: int
    found: bool
    value: bytes = b""
    version: int = 0
    FIELDS = {"token": "Token", "found": "Found", "value": "SdlValue", "version": "SdlVersion"}


@_pdu(0x48)
class XappSdlList(Pdu):
    token: int
    namespace: str
    FIELDS = {"token": "Token", "namespace": "SdlNamespace"}


@_pdu(0x49)
class XappSdlListResult(Pdu):
    token: int
    items: tuple[SdlItem, ...] = ()
    FIELDS = {"token": "Token", "items": "SdlItem"}


for _cls in PDU_TYPES.values():
    for _ie in _cls.FIELDS.values():
        assert _ie in IE_BY_NAME, _ie


# --- encode / decode ----------------------------------------------------------

def encode_ies(items) -> bytes:
    """Write ``(ie_id, value_bytes)`` pairs in canonical (stable, ascending id) order."""
    out = bytearray()
    for ie_id, value in sorted(items, key=lambda kv: kv[0]):
        if len(value) > IE_VALUE_MAX:
            raise OversizeField(f"IE {ie_id:#06x} value is {len(value)} bytes")
        out += struct.pack(">HH", ie_id, len(value))
        out += value
    return bytes(out)


def split_ies(buf: bytes) -> list[tuple[int, bytes]]:
    r = Reader(buf)
    out = []
    while r.remaining():
        ie_id = r.u16()
        out.append((ie_id, r.take(r.u16())))
    return out


def encode_pdu(pdu: Pdu) -> bytes:
    """Canonical encoding of ``pdu``. Pure: equal PDUs give equal bytes."""
    cls = type(pdu)
    if cls not in PDU_TYPES.values():
        raise InvalidField(f"not an E2AP PDU: {pdu!r}")
    items = []
    for attr, ie_name in cls.FIELDS.items():
        d = IE_BY_NAME[ie_name]
        value = getattr(pdu, attr)
        if d.repeated:
            for v in value:
                items.append((d.ie_id, d.kind.pack(attr, v)))
        elif value is None and attr in cls.OPTIONAL:
            continue
        else:
            items.append((d.ie_id, d.kind.pack(attr, value)))
    return bytes([cls.TAG]) + encode_ies(items)


def decode_pdu(buf: bytes) -> Pdu:
    """Inverse of :func:`encode_pdu`. IE order is free; unknown IE ids are skipped."""
    buf = bytes(buf)
    if not buf:
        raise TruncatedBuffer("empty buffer, no PDU tag")
    cls = PDU_TYPES.get(buf[0])
    if cls is None:
        raise UnknownPduTag(f"PDU tag {buf[0]:#04x}")
    wanted = {IE_BY_NAME[ie].ie_id: (attr, IE_BY_NAME[ie]) for attr, ie in cls.FIELDS.items()}
    values: dict[str, Any] = {}
    for ie_id, raw in split_ies(buf[1:]):
        if ie_id not in wanted:
            continue
        attr, d = wanted[ie_id]
        r = Reader(raw)
        v = d.kind.unpack(r)
        r.done()
        if d.repeated:
            values.setdefault(attr, []).append(v)
        elif attr in values:
            raise MalformedIe(f"IE {d.name} appears twice")
        else:
            values[attr] = v
    for attr, ie_name in cls.FIELDS.items():
        if attr in values:
            continue
        if IE_BY_NAME[ie_name].repeated:
            values[attr] = ()
        elif attr in cls.OPTIONAL:
            values[attr] = None
        else:
            raise MissingMandatoryIe(ie_name)
    return cls(**values)
