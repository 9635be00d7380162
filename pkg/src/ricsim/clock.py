"""Clocks that drive every component: a virtual event loop and an asyncio adapter.

Components only see ``now_ms()``, ``call_at()`` and ``call_later()``; the
same agent, RIC and xApp code runs on simulated time in tests and on wall
time behind real sockets.
"""

from __future__ import annotations

import heapq
import itertools
import time
from collections.abc import Callable

# Tie-break order for events sharing a timestamp.
PRIO_SUBFRAME = 0
PRIO_TIMER = 1
PRIO_DELIVERY = 2
PRIO_LATE = 3


class Handle:
    __slots__ = ("callback", "cancelled")

    def __init__(self, callback):
        self.callback = callback
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class VirtualLoop:
    """Single-threaded discrete-event loop over integer milliseconds.

    Events run in ``(time, priority, insertion order)`` order. With ``pace``
    set, the loop sleeps so that one simulated second takes ``1 / pace``
    wall seconds; the event sequence is unchanged.
    """

    def __init__(self, pace: float | None = None):
        self._now = 0
        self._queue: list = []
        self._seq = itertools.count()
        self.pace = pace
        self._wall_start: float | None = None
        self.events_run = 0

    def now_ms(self) -> int:
        return self._now

    def call_at(self, t_ms: int, callback: Callable[[], None], priority: int = PRIO_TIMER) -> Handle:
        if t_ms < self._now:
            raise ValueError(f"cannot schedule at {t_ms} ms, clock is at {self._now} ms")
        h = Handle(callback)
        heapq.heappush(self._queue, (int(t_ms), priority, next(self._seq), h))
        return h

    def call_later(self, delay_ms: int, callback, priority: int = PRIO_TIMER) -> Handle:
        return self.call_at(self._now + int(delay_ms), callback, priority)

    def call_soon(self, callback, priority: int = PRIO_DELIVERY) -> Handle:
        return self.call_at(self._now, callback, priority)

    def _sleep_until(self, t_ms):
        if not self.pace:
            return
        if self._wall_start is None:
            self._wall_start = time.monotonic()
        delay = self._wall_start + t_ms / 1000.0 / self.pace - time.monotonic()
        if delay > 0:
            time.sleep(delay)

    def run_until(self, t_end_ms: int):
        """Run every event scheduled at or before ``t_end_ms``; leave the clock there."""
        while self._queue and self._queue[0][0] <= t_end_ms:
            t, _, _, h = heapq.heappop(self._queue)
            if h.cancelled:
                continue
            self._sleep_until(t)
            self._now = t
            self.events_run += 1
            h.callback()
        self._now = max(self._now, t_end_ms)

    def run_until_idle(self, limit_ms: int = 10**12):
        while self._queue and self._queue[0][0] <= limit_ms:
            self.run_until(self._queue[0][0])

    def pending(self) -> int:
        return sum(1 for *_, h in self._queue if not h.cancelled)


class AsyncioClock:
    """Wall-clock milliseconds since construction, scheduling on an asyncio loop."""

    def __init__(self, loop):
        self.loop = loop
        self._t0 = loop.time()

    def now_ms(self) -> int:
        return int((self.loop.time() - self._t0) * 1000)

    def call_at(self, t_ms, callback, priority=PRIO_TIMER):
        return self.loop.call_at(self._t0 + t_ms / 1000.0, callback)

    def call_later(self, delay_ms, callback, priority=PRIO_TIMER):
        return self.loop.call_later(max(delay_ms, 0) / 1000.0, callback)

    def call_soon(self, callback, priority=PRIO_DELIVERY):
        return self.loop.call_soon(callback)
