"""Framed transports: in-memory links on a virtual clock, and TCP via asyncio.

Both deliver ``(stream_id, payload)`` frames to a handler object with
``frame_received(conn, stream_id, payload)`` and ``connection_lost(conn)``.
Ordering is guaranteed per connection (hence per stream), nothing more.
"""

from __future__ import annotations

import asyncio
import logging
import random

from ricsim.clock import PRIO_DELIVERY
from ricsim.e2ap import encode_pdu
from ricsim.framing import FrameDecoder, frame_write

log = logging.getLogger(__name__)


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host, int(port)


class Connection:
    handler = None
    closed = False
    peer = "?"

    def send(self, stream_id: int, payload: bytes):
        raise NotImplementedError

    def send_pdu(self, stream_id: int, pdu):
        self.send(stream_id, encode_pdu(pdu))

    def close(self):
        raise NotImplementedError


# --- in-memory ------------------------------------------------------------------

class MemoryConnection(Connection):
    def __init__(self, net: MemoryNetwork, local: str, peer: str):
        self.net = net
        self.local = local
        self.peer = peer
        self.other: MemoryConnection | None = None
        self.decoder = FrameDecoder()
        self._last_delivery = 0
        self.frames_sent = 0

    def _deliver_at(self) -> int:
        t = self.net.loop.now_ms() + self.net.latency_ms
        if self.net.jitter_ms:
            t += self.net.rng.randint(0, self.net.jitter_ms)
        t = max(t, self._last_delivery)
        self._last_delivery = t
        return t

    def send(self, stream_id, payload):
        if self.closed:
            raise ConnectionError(f"connection {self.local}->{self.peer} is closed")
        frame = frame_write(stream_id, payload)
        self.frames_sent += 1
        other = self.other
        self.net.loop.call_at(self._deliver_at(), lambda: other._receive(frame), PRIO_DELIVERY)

    def _receive(self, data):
        if self.closed:
            return
        for stream_id, payload in self.decoder.feed(data):
            if self.closed or self.handler is None:
                return
            self.handler.frame_received(self, stream_id, payload)

    def close(self):
        if self.closed:
            return
        self.closed = True
        other = self.other
        self.net.loop.call_at(self._deliver_at(), other._lost, PRIO_DELIVERY)

    def abort(self):
        """Simulate a link failure: both ends see connection_lost."""
        other = self.other
        self.net.loop.call_at(self.net.loop.now_ms(), self._lost, PRIO_DELIVERY)
        self.net.loop.call_at(self._deliver_at(), other._lost, PRIO_DELIVERY)

    def _lost(self):
        if self.closed:
            return
        self.closed = True
        if self.handler is not None:
            self.handler.connection_lost(self)


class MemoryListener:
    def __init__(self, net, addr, on_accept):
        self.net, self.addr, self.on_accept = net, addr, on_accept

    def close(self):
        if self.net.listeners.get(self.addr) is self:
            del self.net.listeners[self.addr]


class MemoryNetwork:
    """Named in-memory endpoints. ``jitter_ms`` draws from a seeded RNG."""

    def __init__(self, loop, latency_ms: int = 0, jitter_ms: int = 0, seed: int = 0):
        self.loop = loop
        self.latency_ms = latency_ms
        self.jitter_ms = jitter_ms
        self.rng = random.Random(seed)
        self.listeners: dict[str, MemoryListener] = {}
        self._client_ports = 0

    def listen(self, addr: str, on_accept) -> MemoryListener:
        if addr in self.listeners:
            raise OSError(f"address {addr} already in use")
        lst = MemoryListener(self, addr, on_accept)
        self.listeners[addr] = lst
        return lst

    def connect(self, addr: str, on_connected, on_failed):
        """Asynchronously connect; exactly one of the callbacks fires later."""
        def attempt():
            lst = self.listeners.get(addr)
            if lst is None:
                on_failed(ConnectionRefusedError(f"nothing listening on {addr}"))
                return
            self._client_ports += 1
            client_name = f"mem-client-{self._client_ports}"
            client = MemoryConnection(self, client_name, addr)
            server = MemoryConnection(self, addr, client_name)
            client.other, server.other = server, client
            server.handler = lst.on_accept(server)
            client.handler = on_connected(client)

        self.loop.call_later(self.latency_ms, attempt, PRIO_DELIVERY)


# --- TCP ------------------------------------------------------------------------

class TcpConnection(Connection, asyncio.Protocol):
    def __init__(self, on_made):
        self._on_made = on_made
        self.transport = None
        self.decoder = FrameDecoder()

    def connection_made(self, transport):
        self.transport = transport
        peer = transport.get_extra_info("peername")
        self.peer = f"{peer[0]}:{peer[1]}" if peer else "?"
        self.handler = self._on_made(self)

    def data_received(self, data):
        try:
            frames = self.decoder.feed(data)
        except ValueError as exc:
            log.warning("dropping connection from %s: %s", self.peer, exc)
            self.close()
            return
        for stream_id, payload in frames:
            if self.handler is not None and not self.closed:
                self.handler.frame_received(self, stream_id, payload)

    def connection_lost(self, exc):
        was_closed = self.closed
        self.closed = True
        if self.handler is not None and not was_closed:
            self.handler.connection_lost(self)

    def send(self, stream_id, payload):
        if self.closed or self.transport is None or self.transport.is_closing():
            raise ConnectionError(f"connection to {self.peer} is closed")
        self.transport.write(frame_write(stream_id, payload))

    def close(self):
        if not self.closed:
            self.closed = True
            if self.transport is not None:
                self.transport.close()


class TcpNetwork:
    """Same surface as MemoryNetwork, backed by asyncio TCP sockets."""

    def __init__(self, loop: asyncio.AbstractEventLoop):
        self.loop = loop

    async def listen(self, addr: str, on_accept):
        host, port = parse_addr(addr)
        return await self.loop.create_server(lambda: TcpConnection(on_accept), host, port)

    def connect(self, addr: str, on_connected, on_failed):
        host, port = parse_addr(addr)

        async def attempt():
            try:
                await self.loop.create_connection(lambda: TcpConnection(on_connected), host, port)
            except OSError as exc:
                on_failed(exc)

        self.loop.create_task(attempt())
