"""Near-RT RIC core: E2 termination, E2 manager / R-NIB, subscription manager,
routing manager and the xApp-facing link, all on one serialized event stream.
"""

from __future__ import annotations

import enum
import logging
import struct
import zlib
from collections.abc import Callable
from dataclasses import dataclass, field

from ricsim import e2ap
from ricsim.e2ap import (
    CAUSE_CONNECTION_LOST,
    CAUSE_DUPLICATE_NODE,
    CAUSE_FUNCTION_NOT_SUPPORTED,
    CAUSE_TIMEOUT,
    CAUSE_UNAUTHORIZED,
    CAUSE_UNKNOWN_NODE,
    CAUSE_UNKNOWN_XAPP,
    Cause,
    GlobalE2NodeId,
    RanFunctionItem,
    Reader,
    RicAction,
    RicRequestId,
    decode_pdu,
)
from ricsim.errors import CodecError, UnknownNode, UnknownXapp, UnsupportedFunction
from ricsim.framing import SUPPORT_STREAM, stream_for_function
from ricsim.sdl import SharedDataLayer
from ricsim.trace import Transcript

log = logging.getLogger(__name__)

RNIB_NS = "rnib"
STATS_NS = "ric-stats"
DEFAULT_TIMEOUT_MS = 2000


@dataclass
class RicConfig:
    e2_listen: str = "127.0.0.1:36421"
    xapp_listen: str = "127.0.0.1:36422"
    plmn_allowlist: tuple[bytes, ...] = (e2ap.plmn_from_str("001/01"),)
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    sdl_journal_path: str | None = None


class NodeStatus(enum.IntEnum):
    CONNECTED = 0
    DISCONNECTED = 1


@dataclass
class RnibEntry:
    node: GlobalE2NodeId
    transport_addr: str
    status: NodeStatus
    functions: tuple[RanFunctionItem, ...]
    connected_at_ms: int

    def function_ids(self) -> list[int]:
        return [f.function_id for f in self.functions]

    def encode(self) -> bytes:
        out = bytearray(e2ap.pack_node_id(self.node))
        out += struct.pack(">BQ", int(self.status), self.connected_at_ms)
        out += e2ap.pack_str("transport_addr", self.transport_addr, 1024)
        out += struct.pack(">H", len(self.functions))
        for f in self.functions:
            out += e2ap.pack_lp("function", e2ap.IE_BY_NAME["RanFunctionItem"].kind.pack("function", f))
        return bytes(out)

    @classmethod
    def decode(cls, buf: bytes) -> RnibEntry:
        r = Reader(buf)
        node = e2ap.unpack_node_id(r)
        status, connected_at = r.u8(), r.u64()
        addr = e2ap.unpack_str(r, "transport_addr", 1024)
        kind = e2ap.IE_BY_NAME["RanFunctionItem"].kind
        functions = []
        for _ in range(r.u16()):
            fr = Reader(r.lp_bytes())
            functions.append(kind.unpack(fr))
            fr.done()
        r.done()
        return cls(node, addr, NodeStatus(status), tuple(functions), connected_at)


class SubState(enum.Enum):
    PENDING = "PENDING"
    ACTIVE = "ACTIVE"
    FAILED = "FAILED"


@dataclass(eq=False)
class Subscription:
    request_id: RicRequestId
    node: GlobalE2NodeId
    function_id: int
    trigger: bytes
    actions: tuple[RicAction, ...]
    xapp_id: str
    state: SubState = SubState.PENDING
    admitted_action_ids: tuple[int, ...] = ()
    cause: Cause | None = None
    delivered: int = 0
    on_done: Callable | None = field(default=None, repr=False)
    _timer: object = field(default=None, repr=False)
    history: list = field(default_factory=list, repr=False)

    def _move(self, state: SubState, cause: Cause | None = None):
        if self.state is SubState.FAILED:
            return False
        if self.state is not SubState.PENDING and state is not SubState.FAILED:
            raise RuntimeError(f"illegal transition {self.state} -> {state}")
        self.state = state
        self.history.append(state)
        if cause is not None:
            self.cause = cause
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None
        return True


@dataclass(eq=False)
class _PendingControl:
    request_id: RicRequestId
    node: GlobalE2NodeId
    xapp_id: str
    on_result: Callable | None
    timer: object = None


class RicCore:
    """The RIC's single logical state machine.

    Every mutation happens inside a callback of the shared clock, so the
    transports feed one totally ordered command stream.
    """

    def __init__(self, clock, config: RicConfig | None = None, sdl: SharedDataLayer | None = None):
        self.clock = clock
        self.config = config or RicConfig()
        self.sdl = sdl or SharedDataLayer(self.config.sdl_journal_path)
        self.transcript = Transcript("ric", clock)
        self.rnib: dict[GlobalE2NodeId, RnibEntry] = {}
        self._node_conn: dict[GlobalE2NodeId, object] = {}
        self._live: dict[RicRequestId, Subscription] = {}
        self.subscriptions: list[Subscription] = []
        self.routes: dict[tuple[GlobalE2NodeId, RicRequestId], str] = {}
        self._controls: dict[RicRequestId, _PendingControl] = {}
        self.xapps: dict[str, Callable] = {}
        self._instance_counters: dict[int, int] = {}
        self.indications_dropped = 0
        self.indications_routed = 0

    # --- transport glue ----------------------------------------------------------

    def accept_e2(self, conn):
        return _E2Link(self, conn)

    def accept_xapp(self, conn):
        return XappSession(self, conn)

    def _send(self, conn, stream_id, pdu, node):
        self.transcript.record("tx", pdu, node)
        try:
            conn.send_pdu(stream_id, pdu)
        except ConnectionError as exc:
            log.warning("send %s to %s failed: %s", pdu.name, node, exc)

    # --- E2 manager ----------------------------------------------------------------

    def handle_e2_setup(self, conn, req: e2ap.E2SetupRequest):
        node = req.node_id
        if bytes(node.plmn_id) not in self.config.plmn_allowlist:
            resp = e2ap.E2SetupFailure(CAUSE_UNAUTHORIZED)
            self._send(conn, SUPPORT_STREAM, resp, node)
            conn.close()
            return resp
        existing = self.rnib.get(node)
        if (existing is not None and existing.status is NodeStatus.CONNECTED
                and self._node_conn.get(node) is not conn):
            resp = e2ap.E2SetupFailure(CAUSE_DUPLICATE_NODE)
            self._send(conn, SUPPORT_STREAM, resp, node)
            conn.close()
            return resp
        entry = RnibEntry(node, getattr(conn, "peer", "?"), NodeStatus.CONNECTED,
                          tuple(req.functions), self.clock.now_ms())
        self.rnib[node] = entry
        self._node_conn[node] = conn
        self.sdl.put(RNIB_NS, str(node), entry.encode())
        resp = e2ap.E2SetupResponse(tuple(f.function_id for f in req.functions))
        self._send(conn, SUPPORT_STREAM, resp, node)
        return resp

    def node_lost(self, node: GlobalE2NodeId):
        entry = self.rnib.get(node)
        if entry is None:
            return
        entry.status = NodeStatus.DISCONNECTED
        self._node_conn.pop(node, None)
        self.sdl.put(RNIB_NS, str(node), entry.encode())
        self._fail_node(node, CAUSE_CONNECTION_LOST)

    def _fail_node(self, node, cause):
        for sub in list(self._live.values()):
            if sub.node == node:
                self._finish(sub, SubState.FAILED, cause)
        for ctl in list(self._controls.values()):
            if ctl.node == node:
                self._control_done(ctl.request_id, e2ap.RicControlFailure(ctl.request_id, cause))

    def rnib_list(self) -> list[RnibEntry]:
        return [RnibEntry.decode(rec.value) for rec in self.sdl.records(RNIB_NS)]

    def _connected(self, node) -> RnibEntry:
        entry = self.rnib.get(node)
        if entry is None or entry.status is not NodeStatus.CONNECTED:
            raise UnknownNode(f"node {node} is not connected")
        return entry

    # --- reset -------------------------------------------------------------------

    def handle_reset(self, node: GlobalE2NodeId, req: e2ap.ResetRequest) -> e2ap.ResetResponse:
        """Node-initiated reset: fail the node's subscriptions; R-NIB entry stays."""
        self._fail_node(node, req.cause)
        return e2ap.ResetResponse()

    def reset_node(self, node: GlobalE2NodeId, cause: Cause = e2ap.CAUSE_OM_RESET):
        """RIC-initiated reset towards ``node``."""
        self._connected(node)
        self._fail_node(node, cause)
        self._send(self._node_conn[node], SUPPORT_STREAM, e2ap.ResetRequest(cause), node)

    # --- subscription manager -----------------------------------------------------

    def register_xapp(self, xapp_id: str, deliver: Callable):
        """``deliver(indication, node)`` is called for every routed indication."""
        self.xapps[xapp_id] = deliver

    def unregister_xapp(self, xapp_id: str):
        self.xapps.pop(xapp_id, None)

    def _allocate_request_id(self, xapp_id: str) -> RicRequestId:
        requestor = zlib.crc32(xapp_id.encode("utf-8")) & 0xFFFF
        nxt = self._instance_counters.get(requestor, 0)
        for _ in range(1 << 16):
            rid = RicRequestId(requestor, nxt)
            nxt = (nxt + 1) & 0xFFFF
            if rid not in self._live and rid not in self._controls:
                self._instance_counters[requestor] = nxt
                return rid
        raise RuntimeError(f"request ids exhausted for requestor {requestor}")

    def _check_target(self, xapp_id, node, function_id) -> RnibEntry:
        if xapp_id not in self.xapps:
            raise UnknownXapp(f"xApp {xapp_id!r} is not registered")
        entry = self._connected(node)
        if function_id not in entry.function_ids():
            raise UnsupportedFunction(f"node {node} does not expose function {function_id}")
        return entry

    def subscribe(self, xapp_id: str, node: GlobalE2NodeId, function_id: int, trigger: bytes,
                  actions, on_done: Callable | None = None) -> Subscription:
        """Start the subscription procedure; ``on_done(sub)`` fires on ACTIVE or FAILED."""
        self._check_target(xapp_id, node, function_id)
        rid = self._allocate_request_id(xapp_id)
        sub = Subscription(rid, node, function_id, bytes(trigger), tuple(actions), xapp_id, on_done=on_done)
        sub.history.append(SubState.PENDING)
        self._live[rid] = sub
        self.subscriptions.append(sub)
        sub._timer = self.clock.call_later(
            self.config.timeout_ms, lambda: self._finish(sub, SubState.FAILED, CAUSE_TIMEOUT))
        req = e2ap.RicSubscriptionRequest(rid, function_id, sub.trigger, sub.actions)
        self._send(self._node_conn[node], stream_for_function(function_id), req, node)
        return sub

    def _finish(self, sub: Subscription, state: SubState, cause: Cause | None = None):
        if not sub._move(state, cause):
            return
        if state is SubState.ACTIVE:
            self.routes[(sub.node, sub.request_id)] = sub.xapp_id
        else:
            self.routes.pop((sub.node, sub.request_id), None)
            self._live.pop(sub.request_id, None)
        if sub.on_done is not None:
            sub.on_done(sub)

    def _on_subscription_response(self, node, pdu):
        sub = self._live.get(pdu.request_id)
        if sub is None or sub.node != node or sub.state is not SubState.PENDING:
            log.info("uncorrelated %s %s from %s", pdu.name, pdu.request_id, node)
            return
        if isinstance(pdu, e2ap.RicSubscriptionResponse):
            sub.admitted_action_ids = tuple(pdu.admitted_action_ids)
            self._finish(sub, SubState.ACTIVE)
        else:
            self._finish(sub, SubState.FAILED, pdu.cause)

    def subscription(self, rid: RicRequestId) -> Subscription | None:
        return self._live.get(rid)

    # --- routing manager -----------------------------------------------------------

    def route_indication(self, ind: e2ap.RicIndication, from_node: GlobalE2NodeId) -> bool:
        xapp_id = self.routes.get((from_node, ind.request_id))
        sub = self._live.get(ind.request_id)
        deliver = self.xapps.get(xapp_id) if xapp_id is not None else None
        if deliver is None or sub is None or sub.state is not SubState.ACTIVE:
            self.indications_dropped += 1
            self.sdl.put(STATS_NS, "indications_dropped", str(self.indications_dropped).encode())
            return False
        sub.delivered += 1
        self.indications_routed += 1
        deliver(ind, from_node)
        return True

    # --- control -------------------------------------------------------------------

    def send_control(self, xapp_id: str, node: GlobalE2NodeId, function_id: int, header: bytes,
                     message: bytes, ack_requested: bool = True,
                     on_result: Callable | None = None) -> RicRequestId:
        """Forward a control request.

        ``on_result`` receives the RicControlAck / RicControlFailure, or None
        straight away when no ack was requested.
        """
        self._check_target(xapp_id, node, function_id)
        rid = self._allocate_request_id(xapp_id)
        req = e2ap.RicControlRequest(rid, function_id, bytes(header), bytes(message), ack_requested)
        if ack_requested:
            ctl = _PendingControl(rid, node, xapp_id, on_result)
            ctl.timer = self.clock.call_later(
                self.config.timeout_ms,
                lambda: self._control_done(rid, e2ap.RicControlFailure(rid, CAUSE_TIMEOUT)))
            self._controls[rid] = ctl
        self._send(self._node_conn[node], stream_for_function(function_id), req, node)
        if not ack_requested and on_result is not None:
            on_result(None)
        return rid

    def _control_done(self, rid, pdu):
        ctl = self._controls.pop(rid, None)
        if ctl is None:
            return
        if ctl.timer is not None:
            ctl.timer.cancel()
        if ctl.on_result is not None:
            ctl.on_result(pdu)

    # --- SDL passthrough -------------------------------------------------------------

    def sdl_put(self, namespace, key, value) -> int:
        return self.sdl.put(namespace, key, value)

    def sdl_get(self, namespace, key):
        return self.sdl.get(namespace, key)

    # --- inbound dispatch --------------------------------------------------------------

    def _on_node_pdu(self, link: _E2Link, pdu):
        node = link.node
        self.transcript.record("rx", pdu, node or getattr(pdu, "node_id", None))
        if isinstance(pdu, e2ap.E2SetupRequest):
            if node is not None and node != pdu.node_id:
                log.warning("connection already bound to %s, ignoring setup for %s", node, pdu.node_id)
                return
            resp = self.handle_e2_setup(link.conn, pdu)
            if isinstance(resp, e2ap.E2SetupResponse):
                link.node = pdu.node_id
            return
        if node is None or self._node_conn.get(node) is not link.conn:
            log.warning("%s before successful setup, ignored", pdu.name)
            return
        if isinstance(pdu, e2ap.RicIndication):
            self.route_indication(pdu, node)
        elif isinstance(pdu, (e2ap.RicSubscriptionResponse, e2ap.RicSubscriptionFailure)):
            self._on_subscription_response(node, pdu)
        elif isinstance(pdu, (e2ap.RicControlAck, e2ap.RicControlFailure)):
            ctl = self._controls.get(pdu.request_id)
            if ctl is not None and ctl.node == node:
                self._control_done(pdu.request_id, pdu)
        elif isinstance(pdu, e2ap.ResetRequest):
            self._send(link.conn, SUPPORT_STREAM, self.handle_reset(node, pdu), node)
        elif isinstance(pdu, e2ap.ResetResponse):
            pass
        else:
            log.warning("unexpected %s from node %s", pdu.name, node)


class _E2Link:
    def __init__(self, ric: RicCore, conn):
        self.ric = ric
        self.conn = conn
        self.node: GlobalE2NodeId | None = None

    def frame_received(self, conn, stream_id, payload):
        try:
            pdu = decode_pdu(payload)
        except CodecError as exc:
            log.warning("undecodable PDU from %s on stream %d: %s", conn.peer, stream_id, exc)
            return
        self.ric._on_node_pdu(self, pdu)

    def connection_lost(self, conn):
        if self.node is not None and self.ric._node_conn.get(self.node) is conn:
            self.ric.node_lost(self.node)


class XappSession:
    """RIC side of one xApp connection."""

    def __init__(self, ric: RicCore, conn):
        self.ric = ric
        self.conn = conn
        self.name: str | None = None

    def _reply(self, pdu, stream_id=SUPPORT_STREAM):
        try:
            self.conn.send_pdu(stream_id, pdu)
        except ConnectionError as exc:
            log.warning("xApp %s unreachable: %s", self.name, exc)

    def _deliver(self, ind, node):
        self._reply(ind, stream_for_function(ind.function_id))

    def frame_received(self, conn, stream_id, payload):
        try:
            pdu = decode_pdu(payload)
        except CodecError as exc:
            log.warning("undecodable xApp message: %s", exc)
            return
        ric = self.ric
        if isinstance(pdu, e2ap.XappRegister):
            self.name = pdu.xapp_name
            ric.register_xapp(pdu.xapp_name, self._deliver)
            self._reply(e2ap.XappRegisterAck(pdu.xapp_name))
        elif isinstance(pdu, e2ap.XappSubscribe):
            self._subscribe(pdu)
        elif isinstance(pdu, e2ap.XappControl):
            self._control(pdu)
        elif isinstance(pdu, e2ap.XappSdlGet):
            got = ric.sdl_get(pdu.namespace, pdu.key)
            if got is None:
                self._reply(e2ap.XappSdlGetResult(pdu.token, False))
            else:
                self._reply(e2ap.XappSdlGetResult(pdu.token, True, got[0], got[1]))
        elif isinstance(pdu, e2ap.XappSdlList):
            items = tuple(e2ap.SdlItem(r.key, r.value, r.version) for r in ric.sdl.records(pdu.namespace))
            self._reply(e2ap.XappSdlListResult(pdu.token, items))
        else:
            log.warning("unexpected %s on xApp link", pdu.name)

    def _local_failure(self, exc) -> Cause:
        if isinstance(exc, UnknownXapp):
            return CAUSE_UNKNOWN_XAPP
        if isinstance(exc, UnknownNode):
            return CAUSE_UNKNOWN_NODE
        return CAUSE_FUNCTION_NOT_SUPPORTED

    def _subscribe(self, pdu: e2ap.XappSubscribe):
        token = pdu.token

        def done(sub: Subscription):
            if sub.state is SubState.ACTIVE:
                self._reply(e2ap.XappSubscribeResult(token, sub.request_id, sub.admitted_action_ids))
            else:
                self._reply(e2ap.XappSubscribeResult(token, sub.request_id, cause=sub.cause))

        try:
            self.ric.subscribe(self.name or "", pdu.node_id, pdu.function_id, pdu.event_trigger,
                               pdu.actions, on_done=done)
        except (UnknownXapp, UnknownNode, UnsupportedFunction) as exc:
            self._reply(e2ap.XappSubscribeResult(token, cause=self._local_failure(exc)))

    def _control(self, pdu: e2ap.XappControl):
        token = pdu.token

        def done(result):
            if result is None:
                self._reply(e2ap.XappControlResult(token, e2ap.ControlOutcome.NO_ACK))
            elif isinstance(result, e2ap.RicControlAck):
                self._reply(e2ap.XappControlResult(token, e2ap.ControlOutcome.ACK))
            else:
                self._reply(e2ap.XappControlResult(token, e2ap.ControlOutcome.FAILURE, result.cause))

        try:
            self.ric.send_control(self.name or "", pdu.node_id, pdu.function_id, pdu.header,
                                  pdu.message, pdu.ack_requested, on_result=done)
        except (UnknownXapp, UnknownNode, UnsupportedFunction) as exc:
            self._reply(e2ap.XappControlResult(token, e2ap.ControlOutcome.FAILURE, self._local_failure(exc)))

    def connection_lost(self, conn):
        if self.name is not None and self.ric.xapps.get(self.name) == self._deliver:
            self.ric.unregister_xapp(self.name)
