"""xApp side of the RIC link, plus the shared xApp skeleton."""

from __future__ import annotations

import itertools
import logging
from collections.abc import Callable

from ricsim import e2ap
from ricsim.errors import CodecError
from ricsim.framing import SUPPORT_STREAM, stream_for_function
from ricsim.ric import RNIB_NS, NodeStatus, RnibEntry

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SUBSCRIPTION = 3
EXIT_TRANSPORT = 4


class RicClient:
    """Callback-driven handle an xApp uses to talk to the RIC."""

    def __init__(self, network, ric_addr: str, name: str):
        self.network = network
        self.ric_addr = ric_addr
        self.name = name
        self.conn = None
        self.registered = False
        self._tokens = itertools.count(1)
        self._pending: dict[int, Callable] = {}
        self._indication_handlers: dict[e2ap.RicRequestId, Callable] = {}
        self._on_ready = None
        self._on_error = None

    def connect(self, on_ready: Callable[[], None], on_error: Callable[[Exception], None]):
        self._on_ready, self._on_error = on_ready, on_error
        self.network.connect(self.ric_addr, self._connected, on_error)

    def _connected(self, conn):
        self.conn = conn
        conn.send_pdu(SUPPORT_STREAM, e2ap.XappRegister(self.name))
        return self

    def _request(self, pdu_factory, on_result, stream_id=SUPPORT_STREAM):
        token = next(self._tokens)
        self._pending[token] = on_result
        try:
            self.conn.send_pdu(stream_id, pdu_factory(token))
        except ConnectionError as exc:
            self._pending.pop(token, None)
            if self._on_error is not None:
                self._on_error(exc)
        return token

    def subscribe(self, node, function_id, trigger, actions, on_result, on_indication):
        """``on_result(XappSubscribeResult)``; indications then go to ``on_indication(ind)``."""
        def done(result: e2ap.XappSubscribeResult):
            if result.cause is None and result.request_id is not None:
                self._indication_handlers[result.request_id] = on_indication
            on_result(result)

        return self._request(
            lambda tok: e2ap.XappSubscribe(tok, node, function_id, trigger, tuple(actions)),
            done, stream_for_function(function_id))

    def control(self, node, function_id, header, message, ack_requested, on_result):
        return self._request(
            lambda tok: e2ap.XappControl(tok, node, function_id, header, message, ack_requested),
            on_result, stream_for_function(function_id))

    def sdl_list(self, namespace, on_result):
        return self._request(lambda tok: e2ap.XappSdlList(tok, namespace), on_result)

    def sdl_get(self, namespace, key, on_result):
        return self._request(lambda tok: e2ap.XappSdlGet(tok, namespace, key), on_result)

    def rnib_list(self, on_result: Callable[[list[RnibEntry]], None]):
        self.sdl_list(RNIB_NS, lambda res: on_result([RnibEntry.decode(i.value) for i in res.items]))

    def frame_received(self, conn, stream_id, payload):
        try:
            pdu = e2ap.decode_pdu(payload)
        except CodecError as exc:
            log.warning("undecodable message from RIC: %s", exc)
            return
        if isinstance(pdu, e2ap.XappRegisterAck):
            self.registered = True
            if self._on_ready is not None:
                self._on_ready()
        elif isinstance(pdu, e2ap.RicIndication):
            handler = self._indication_handlers.get(pdu.request_id)
            if handler is not None:
                handler(pdu)
        elif hasattr(pdu, "token"):
            cb = self._pending.pop(pdu.token, None)
            if cb is not None:
                cb(pdu)
        else:
            log.warning("unexpected %s from RIC", pdu.name)

    def connection_lost(self, conn):
        self.conn = None
        if self._on_error is not None:
            self._on_error(ConnectionError("RIC closed the connection"))


def nodes_with(entries: list[RnibEntry], sm_name: str) -> list[tuple[RnibEntry, int]]:
    """Connected nodes exposing ``sm_name``, with that function's id."""
    out = []
    for e in entries:
        if e.status is not NodeStatus.CONNECTED:
            continue
        for f in e.functions:
            if f.sm_name == sm_name:
                out.append((e, f.function_id))
    return out


class Xapp:
    """Common lifecycle: connect, register, discover nodes, then run; sets ``exit_code`` on exit."""

    def __init__(self, descriptor, clock, network, ric_addr, sink, on_exit: Callable[[int], None] | None = None):
        self.descriptor = descriptor
        self.clock = clock
        self.client = RicClient(network, ric_addr, descriptor.xapp_name)
        self.sink = sink
        self.exit_code: int | None = None
        self.exit_reason = ""
        self.on_exit = on_exit
        self.warnings = 0

    def start(self):
        self.client.connect(lambda: self.client.rnib_list(self._discovered), self._transport_error)

    def _transport_error(self, exc):
        self.stop(EXIT_TRANSPORT, f"transport: {exc}")

    def stop(self, code: int, reason: str = ""):
        if self.exit_code is not None:
            return
        self.exit_code = code
        self.exit_reason = reason
        if code:
            log.error("%s exiting with %d: %s", self.descriptor.xapp_name, code, reason)
        self.sink.flush()
        if self.on_exit is not None:
            self.on_exit(code)

    @property
    def running(self) -> bool:
        return self.client.registered and self.exit_code is None

    def _discovered(self, entries):
        raise NotImplementedError
