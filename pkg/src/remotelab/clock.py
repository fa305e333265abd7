"""Injectable time sources: a deterministic virtual scheduler and a wall-clock one.

Every timed behaviour in the platform (frame delivery latency, session timers,
acknowledgement deadlines, test cadences) goes through a Scheduler so that the
whole stack can run in virtual time during tests and in real time when serving.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from datetime import datetime, timedelta, timezone
from typing import Callable

# Virtual runs are anchored to a fixed UTC epoch so timestamps, day buckets and
# report output are reproducible byte for byte.
VIRTUAL_EPOCH = datetime(2023, 7, 1, tzinfo=timezone.utc)


class TimerHandle:
    """Cancellation token for a scheduled callback."""

    __slots__ = ("when_ms", "callback", "cancelled")

    def __init__(self, when_ms: float, callback: Callable[[], None]):
        self.when_ms = when_ms
        self.callback = callback
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    """Interface shared by the virtual and real-time implementations."""

    def now_ms(self) -> float:
        raise NotImplementedError

    def call_at(self, when_ms: float, callback: Callable[[], None]) -> TimerHandle:
        raise NotImplementedError

    def call_later(self, delay_ms: float, callback: Callable[[], None]) -> TimerHandle:
        return self.call_at(self.now_ms() + max(0.0, delay_ms), callback)

    def utc_at(self, at_ms: float) -> datetime:
        raise NotImplementedError

    def utc_now(self) -> datetime:
        return self.utc_at(self.now_ms())

    def iso_now(self) -> str:
        return self.utc_now().isoformat()

    def sleep(self, duration_ms: float) -> None:
        """Let `duration_ms` of scheduler time pass (blocking the caller)."""
        raise NotImplementedError


class VirtualScheduler(Scheduler):
    """Discrete-event clock: time advances only by running queued callbacks.

    Callbacks scheduled for the same instant run in submission order, which
    keeps every simulation deterministic.
    """

    def __init__(self, epoch: datetime = VIRTUAL_EPOCH):
        self._now = 0.0
        self._epoch = epoch
        self._seq = itertools.count()
        self._queue: list[tuple[float, int, TimerHandle]] = []

    def now_ms(self) -> float:
        return self._now

    def utc_at(self, at_ms: float) -> datetime:
        return self._epoch + timedelta(milliseconds=at_ms)

    def call_at(self, when_ms: float, callback: Callable[[], None]) -> TimerHandle:
        handle = TimerHandle(max(when_ms, self._now), callback)
        heapq.heappush(self._queue, (handle.when_ms, next(self._seq), handle))
        return handle

    def run_until(self, deadline_ms: float) -> None:
        """Execute every event due up to and including `deadline_ms`."""
        while self._queue and self._queue[0][0] <= deadline_ms:
            when, _, handle = heapq.heappop(self._queue)
            self._now = max(self._now, when)
            if not handle.cancelled:
                handle.callback()
        self._now = max(self._now, deadline_ms)

    def run_for(self, duration_ms: float) -> None:
        self.run_until(self._now + duration_ms)

    def sleep(self, duration_ms: float) -> None:
        self.run_for(duration_ms)

    def drain(self, max_events: int = 1_000_000) -> None:
        """Run until no events remain. Self-rescheduling loops hit max_events."""
        count = 0
        while self._queue:
            when, _, handle = heapq.heappop(self._queue)
            self._now = max(self._now, when)
            if handle.cancelled:
                continue
            handle.callback()
            count += 1
            if count >= max_events:
                raise RuntimeError("drain exceeded max_events; self-rescheduling loop?")

    @property
    def pending(self) -> int:
        return sum(1 for _, _, h in self._queue if not h.cancelled)


class RealTimeScheduler(Scheduler):
    """Wall-clock scheduler backed by a single worker thread.

    Callbacks run on the worker thread; components guard their own state.
    """

    def __init__(self):
        self._t0 = time.monotonic()
        self._utc0 = datetime.now(timezone.utc)
        self._seq = itertools.count()
        self._queue: list[tuple[float, int, TimerHandle]] = []
        self._cond = threading.Condition()
        self._closed = False
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def utc_at(self, at_ms: float) -> datetime:
        return self._utc0 + timedelta(milliseconds=at_ms)

    def call_at(self, when_ms: float, callback: Callable[[], None]) -> TimerHandle:
        handle = TimerHandle(when_ms, callback)
        with self._cond:
            heapq.heappush(self._queue, (when_ms, next(self._seq), handle))
            self._cond.notify()
        return handle

    def sleep(self, duration_ms: float) -> None:
        time.sleep(duration_ms / 1000.0)

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify()
        self._thread.join(timeout=2.0)

    def _run(self) -> None:
        while True:
            with self._cond:
                if self._closed:
                    return
                if not self._queue:
                    self._cond.wait(timeout=0.5)
                    continue
                when, _, handle = self._queue[0]
                delay = (when - self.now_ms()) / 1000.0
                if delay > 0:
                    self._cond.wait(timeout=min(delay, 0.5))
                    continue
                heapq.heappop(self._queue)
            if not handle.cancelled:
                try:
                    handle.callback()
                except Exception:  # noqa: BLE001 - timer thread must survive
                    import traceback

                    traceback.print_exc()
