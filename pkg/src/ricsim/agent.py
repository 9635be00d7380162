"""E2 agent: the node-side endpoint that registers a simulated RAN with the RIC,
runs report timers for installed subscriptions and applies control messages.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from ricsim import e2ap, sm_kpm, sm_slicing
from ricsim.clock import PRIO_TIMER
from ricsim.e2ap import (
    CAUSE_ACTION_NOT_SUPPORTED,
    CAUSE_DUPLICATE_REQUEST_ID,
    CAUSE_DUPLICATE_SLICE_ID,
    CAUSE_FUNCTION_NOT_SUPPORTED,
    CAUSE_MALFORMED_SM_PAYLOAD,
    CAUSE_MALFORMED_TRIGGER,
    CAUSE_SHARE_SUM_EXCEEDED,
    CAUSE_UNKNOWN_SLICE,
    ActionType,
    Cause,
    GlobalE2NodeId,
    RanFunctionItem,
    RicRequestId,
)
from ricsim.errors import (
    CodecError,
    DuplicateSliceId,
    InvalidField,
    ShareSumExceeded,
    UnknownSlice,
)
from ricsim.framing import SUPPORT_STREAM, stream_for_function
from ricsim.trace import Transcript

log = logging.getLogger(__name__)

DEFAULT_RETRY_MS = 5000


class Rejected(Exception):
    def __init__(self, cause: Cause, reason: str = ""):
        super().__init__(reason or str(cause))
        self.cause = cause


@dataclass
class AgentConfig:
    ric_addr: str
    node: GlobalE2NodeId
    functions: tuple[RanFunctionItem, ...] = ()
    retry_interval_ms: int = DEFAULT_RETRY_MS

    def __post_init__(self):
        self.functions = tuple(self.functions)
        if not self.functions:
            raise InvalidField("an E2 agent must expose at least one RAN function")
        names = [f.sm_name for f in self.functions]
        if len(set(names)) != len(names):
            raise InvalidField(f"duplicate service model names {names}")


class AgentState(enum.Enum):
    IDLE = "idle"
    CONNECTING = "connecting"
    SETUP_PENDING = "setup-pending"
    CONNECTED = "connected"
    RETRY_WAIT = "retrying"


@dataclass(eq=False)
class InstalledSubscription:
    request_id: RicRequestId
    function_id: int
    period_ms: int
    action_ids: tuple[int, ...]
    start_ms: int
    next_fire_ms: int
    sequence_number: int = 1
    fired: int = 0
    last_fire_ms: int = 0
    timer: object = field(default=None, repr=False)

    @property
    def action_id(self) -> int:
        return self.action_ids[0]


# --- service-model agents -----------------------------------------------------------

class SmAgent:
    """Owns one RAN function: admits subscriptions, builds reports, applies controls."""

    function: RanFunctionItem

    def __init__(self, ran, node: GlobalE2NodeId):
        self.ran = ran
        self.node = node

    def admit(self, req: e2ap.RicSubscriptionRequest) -> tuple[int, tuple[int, ...]]:
        try:
            trigger = sm_kpm.decode_trigger(req.event_trigger)
        except CodecError as exc:
            raise Rejected(CAUSE_MALFORMED_TRIGGER, str(exc)) from None
        admitted = tuple(a.action_id for a in req.actions if a.action_type == ActionType.REPORT)
        if not admitted:
            raise Rejected(CAUSE_ACTION_NOT_SUPPORTED, "no REPORT action to admit")
        return trigger.period_ms, admitted

    def header(self, now_ms) -> bytes:
        return sm_kpm.encode_header(sm_kpm.KpmIndicationHeader(self.node.plmn_id, self.node.node_id, now_ms))

    def report(self, start_ms: int, end_ms: int) -> bytes:
        raise NotImplementedError

    def control(self, req: e2ap.RicControlRequest, now_ms: int):
        raise Rejected(CAUSE_ACTION_NOT_SUPPORTED, f"{self.function.sm_name} has no CONTROL service")


class KpmSmAgent(SmAgent):
    function = sm_kpm.function_item()

    def report(self, start_ms, end_ms):
        return sm_kpm.encode_report(sm_kpm.build_report(self.ran.snapshot(start_ms, end_ms)))


class SlicingSmAgent(SmAgent):
    function = sm_slicing.function_item()

    def report(self, start_ms, end_ms):
        return sm_slicing.encode_slice_report(sm_slicing.build_slice_report(self.ran.snapshot(start_ms, end_ms)))

    def control(self, req, now_ms):
        try:
            cmd = sm_slicing.decode_control(req.message)
            self.ran.apply_slice_config(cmd, now_ms)
        except ShareSumExceeded as exc:
            raise Rejected(CAUSE_SHARE_SUM_EXCEEDED, str(exc)) from None
        except DuplicateSliceId as exc:
            raise Rejected(CAUSE_DUPLICATE_SLICE_ID, str(exc)) from None
        except UnknownSlice as exc:
            raise Rejected(CAUSE_UNKNOWN_SLICE, str(exc)) from None
        except CodecError as exc:
            raise Rejected(CAUSE_MALFORMED_SM_PAYLOAD, str(exc)) from None


def default_sm_agents(ran, node) -> dict[int, SmAgent]:
    agents = [KpmSmAgent(ran, node), SlicingSmAgent(ran, node)]
    return {a.function.function_id: a for a in agents}


# --- the agent ------------------------------------------------------------------------

class E2Agent:
    def __init__(self, cfg: AgentConfig, clock, network, ran, sm_agents: dict[int, SmAgent] | None = None):
        self.cfg = cfg
        self.clock = clock
        self.network = network
        self.ran = ran
        self.sm_agents = sm_agents if sm_agents is not None else default_sm_agents(ran, cfg.node)
        self.state = AgentState.IDLE
        self.conn = None
        self.transcript = Transcript(f"node:{cfg.node}", clock)
        self.installed: dict[RicRequestId, InstalledSubscription] = {}
        self.attempts = 0
        self.attempt_times: list[int] = []
        self.connected_at_ms: int | None = None
        self.indications_sent = 0
        self.indications_dropped = 0
        self._setup_timer = None
        self.on_connected = None

    # --- connection / setup ---------------------------------------------------------

    def start(self):
        self._attempt()

    connect_and_setup = start

    def _attempt(self):
        self.state = AgentState.CONNECTING
        self.attempts += 1
        self.attempt_times.append(self.clock.now_ms())
        self.network.connect(self.cfg.ric_addr, self._on_connected, self._on_connect_failed)

    def _on_connect_failed(self, exc):
        log.info("connect to %s failed (%s); retry in %d ms", self.cfg.ric_addr, exc, self.cfg.retry_interval_ms)
        self._retry_later()

    def _retry_later(self):
        self.state = AgentState.RETRY_WAIT
        self.clock.call_later(self.cfg.retry_interval_ms, self._attempt)

    def _on_connected(self, conn):
        self.conn = conn
        self.state = AgentState.SETUP_PENDING
        self._send(SUPPORT_STREAM, e2ap.E2SetupRequest(self.cfg.node, self.cfg.functions))
        self._setup_timer = self.clock.call_later(self.cfg.retry_interval_ms, self._setup_timed_out)
        return self

    def _setup_timed_out(self):
        if self.state is AgentState.SETUP_PENDING:
            log.info("no setup response; dropping connection")
            self._drop_connection()
            self._retry_later()

    def _drop_connection(self):
        if self.conn is not None:
            self.conn.close()
            self.conn = None
        self._cancel_all()

    def _send(self, stream_id, pdu) -> bool:
        self.transcript.record("tx", pdu, self.cfg.node)
        try:
            if self.conn is None:
                raise ConnectionError("not connected")
            self.conn.send_pdu(stream_id, pdu)
            return True
        except ConnectionError as exc:
            log.info("send %s failed: %s", pdu.name, exc)
            return False

    # --- inbound --------------------------------------------------------------------

    def frame_received(self, conn, stream_id, payload):
        if conn is not self.conn:
            return
        try:
            pdu = e2ap.decode_pdu(payload)
        except CodecError as exc:
            log.warning("undecodable PDU from RIC: %s", exc)
            return
        self.transcript.record("rx", pdu, self.cfg.node)
        if isinstance(pdu, e2ap.E2SetupResponse):
            if self.state is AgentState.SETUP_PENDING:
                self._setup_timer.cancel()
                self.state = AgentState.CONNECTED
                self.connected_at_ms = self.clock.now_ms()
                if self.on_connected is not None:
                    self.on_connected()
        elif isinstance(pdu, e2ap.E2SetupFailure):
            if self.state is AgentState.SETUP_PENDING:
                self._setup_timer.cancel()
                log.info("setup rejected: %s", pdu.cause)
                self._drop_connection()
                self._retry_later()
        elif self.state is not AgentState.CONNECTED:
            log.warning("%s while not connected, ignored", pdu.name)
        elif isinstance(pdu, e2ap.RicSubscriptionRequest):
            self.handle_subscription(pdu)
        elif isinstance(pdu, e2ap.RicControlRequest):
            self.handle_control(pdu)
        elif isinstance(pdu, e2ap.ResetRequest):
            self.handle_reset(pdu)
        elif isinstance(pdu, e2ap.ResetResponse):
            pass
        else:
            log.warning("unexpected %s from RIC", pdu.name)

    def connection_lost(self, conn):
        if conn is not self.conn:
            return
        log.info("lost connection to RIC")
        self.conn = None
        self._cancel_all()
        if self._setup_timer is not None:
            self._setup_timer.cancel()
        self._retry_later()

    # --- procedures -----------------------------------------------------------------

    def handle_subscription(self, req: e2ap.RicSubscriptionRequest):
        stream = stream_for_function(req.function_id)
        sm = self.sm_agents.get(req.function_id)
        try:
            if sm is None or req.function_id not in (f.function_id for f in self.cfg.functions):
                raise Rejected(CAUSE_FUNCTION_NOT_SUPPORTED)
            if req.request_id in self.installed:
                raise Rejected(CAUSE_DUPLICATE_REQUEST_ID)
            period, admitted = sm.admit(req)
        except Rejected as exc:
            resp = e2ap.RicSubscriptionFailure(req.request_id, exc.cause)
            self._send(stream, resp)
            return resp
        now = self.clock.now_ms()
        sub = InstalledSubscription(req.request_id, req.function_id, period, admitted,
                                    start_ms=now, next_fire_ms=now + period, last_fire_ms=now)
        self.installed[req.request_id] = sub
        sub.timer = self.clock.call_at(sub.next_fire_ms, lambda: self.on_timer_expiry(sub), PRIO_TIMER)
        resp = e2ap.RicSubscriptionResponse(req.request_id, admitted)
        self._send(stream, resp)
        return resp

    def on_timer_expiry(self, sub: InstalledSubscription):
        if self.installed.get(sub.request_id) is not sub:
            return
        now = self.clock.now_ms()
        self.ran.advance_to(now)
        sm = self.sm_agents[sub.function_id]
        header = sm.header(now)
        message = sm.report(sub.last_fire_ms, now)
        for action_id in sub.action_ids:
            ind = e2ap.RicIndication(sub.request_id, sub.function_id, action_id, sub.sequence_number,
                                     header, message)
            sub.sequence_number += 1
            if self._send(stream_for_function(sub.function_id), ind):
                self.indications_sent += 1
            else:
                self.indications_dropped += 1
        sub.fired += 1
        sub.last_fire_ms = now
        sub.next_fire_ms = sub.start_ms + (sub.fired + 1) * sub.period_ms
        sub.timer = self.clock.call_at(sub.next_fire_ms, lambda: self.on_timer_expiry(sub), PRIO_TIMER)

    def handle_control(self, req: e2ap.RicControlRequest):
        stream = stream_for_function(req.function_id)
        sm = self.sm_agents.get(req.function_id)
        try:
            if sm is None:
                raise Rejected(CAUSE_FUNCTION_NOT_SUPPORTED)
            sm.control(req, self.clock.now_ms())
        except Rejected as exc:
            log.info("control %s rejected: %s", req.request_id, exc)
            resp = e2ap.RicControlFailure(req.request_id, exc.cause)
            self._send(stream, resp)
            return resp
        if req.ack_requested:
            resp = e2ap.RicControlAck(req.request_id)
            self._send(stream, resp)
            return resp
        return None

    def _cancel_all(self):
        for sub in self.installed.values():
            if sub.timer is not None:
                sub.timer.cancel()
        self.installed.clear()

    def handle_reset(self, req: e2ap.ResetRequest) -> e2ap.ResetResponse:
        """RIC-initiated reset: drop every subscription; slicing state is kept."""
        self._cancel_all()
        resp = e2ap.ResetResponse()
        self._send(SUPPORT_STREAM, resp)
        return resp

    def request_reset(self, cause: Cause = e2ap.CAUSE_OM_RESET):
        """Node-initiated reset."""
        self._cancel_all()
        self._send(SUPPORT_STREAM, e2ap.ResetRequest(cause))
