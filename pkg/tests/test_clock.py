import threading
import time

import pytest

from remotelab.clock import RealTimeScheduler, VirtualScheduler


def test_virtual_time_starts_at_zero():
    scheduler = VirtualScheduler()
    assert scheduler.now_ms() == 0.0


def test_events_fire_in_time_order():
    scheduler = VirtualScheduler()
    fired = []
    scheduler.call_later(300, lambda: fired.append("c"))
    scheduler.call_later(100, lambda: fired.append("a"))
    scheduler.call_later(200, lambda: fired.append("b"))
    scheduler.run_until(250)
    assert fired == ["a", "b"]
    assert scheduler.now_ms() == 250
    scheduler.run_for(50)
    assert fired == ["a", "b", "c"]


def test_same_instant_preserves_submission_order():
    scheduler = VirtualScheduler()
    fired = []
    for i in range(10):
        scheduler.call_later(500, lambda i=i: fired.append(i))
    scheduler.run_for(500)
    assert fired == list(range(10))


def test_cancelled_timers_do_not_fire():
    scheduler = VirtualScheduler()
    fired = []
    handle = scheduler.call_later(100, lambda: fired.append("x"))
    handle.cancel()
    scheduler.run_for(1000)
    assert fired == []


def test_callbacks_can_schedule_within_the_same_run():
    scheduler = VirtualScheduler()
    fired = []

    def first():
        fired.append("first")
        scheduler.call_later(10, lambda: fired.append("second"))

    scheduler.call_later(100, first)
    scheduler.run_until(200)
    assert fired == ["first", "second"]


def test_past_deadline_events_clamp_to_now():
    scheduler = VirtualScheduler()
    scheduler.run_until(1000)
    fired = []
    scheduler.call_at(20, lambda: fired.append("late"))  # already in the past
    scheduler.run_for(0)
    assert fired == ["late"]
    assert scheduler.now_ms() == 1000


def test_utc_mapping_is_anchored():
    scheduler = VirtualScheduler()
    assert scheduler.utc_at(0).isoformat() == "2023-07-01T00:00:00+00:00"
    assert scheduler.utc_at(36_000_000).isoformat() == "2023-07-01T10:00:00+00:00"
    # one virtual day per 86.4 million ms
    assert scheduler.utc_at(86_400_000).date().isoformat() == "2023-07-02"


def test_drain_guards_against_runaway_loops():
    scheduler = VirtualScheduler()

    def reschedule():
        scheduler.call_later(1, reschedule)

    scheduler.call_later(1, reschedule)
    with pytest.raises(RuntimeError, match="max_events"):
        scheduler.drain(max_events=100)


def test_real_scheduler_fires_and_cancels():
    scheduler = RealTimeScheduler()
    try:
        fired = threading.Event()
        cancelled_fired = []
        handle = scheduler.call_later(30_000, lambda: cancelled_fired.append(1))
        handle.cancel()
        scheduler.call_later(30, fired.set)
        assert fired.wait(timeout=2.0)
        assert cancelled_fired == []
        assert scheduler.now_ms() > 0
    finally:
        scheduler.close()


def test_real_scheduler_sleep_passes_wall_time():
    scheduler = RealTimeScheduler()
    try:
        t0 = time.monotonic()
        scheduler.sleep(50)
        assert time.monotonic() - t0 >= 0.045
    finally:
        scheduler.close()
