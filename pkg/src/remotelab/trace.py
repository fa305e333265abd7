"""Event trace recording and protocol-conformance checking.

Components emit structured events as they act; the checker verifies that a
recorded session followed the required order:

    auth -> auth_ok -> room_join -> session_start -> ack (within the deadline)
    -> call -> input* -> session_end -> flag_vacant

and that a failed probe marks the node unavailable exactly at the deadline.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass(frozen=True)
class TraceEvent:
    ts_ms: float
    kind: str
    fields: dict

    def get(self, key: str, default=None):
        return self.fields.get(key, default)


@dataclass
class Trace:
    events: list[TraceEvent] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()
        self._clock = None

    def bind_clock(self, scheduler) -> None:
        self._clock = scheduler

    def emit(self, kind: str, ts_ms: float | None = None, **fields) -> TraceEvent:
        if ts_ms is None:
            ts_ms = self._clock.now_ms() if self._clock is not None else 0.0
        event = TraceEvent(ts_ms=ts_ms, kind=kind, fields=fields)
        with self._lock:
            self.events.append(event)
        return event

    def select(self, kind: str | None = None, **match) -> list[TraceEvent]:
        with self._lock:
            snapshot = list(self.events)
        out = []
        for e in snapshot:
            if kind is not None and e.kind != kind:
                continue
            if all(e.get(k) == v for k, v in match.items()):
                out.append(e)
        return out

    def first(self, kind: str, **match) -> TraceEvent | None:
        found = self.select(kind, **match)
        return found[0] if found else None


ACK_DEADLINE_MS = 5_000.0

SESSION_FLOW = (
    "auth",
    "auth_ok",
    "room_join",
    "session_start",
    "ack",
    "call",
    "session_end",
    "flag_vacant",
)


def check_session_flow(
    trace: Trace,
    session_id: str,
    device_id: str,
    node_id: str,
    ack_deadline_ms: float = ACK_DEADLINE_MS,
    require_inputs: int = 0,
) -> list[str]:
    """Violations of the canonical session ordering; empty list means conformant."""
    violations: list[str] = []

    def only(kind: str, **match) -> TraceEvent | None:
        events = trace.select(kind, **match)
        if not events:
            violations.append(f"missing {kind} event for {match}")
            return None
        return events[0]

    auth = only("auth", device_id=device_id)
    auth_ok = only("auth_ok", device_id=device_id)
    room = only("room_join", device_id=device_id)
    start = only("session_start", session_id=session_id)
    ack = only("ack", session_id=session_id)
    call = only("call", session_id=session_id)
    end = only("session_end", session_id=session_id)
    vacant = only("flag_vacant", node_id=node_id)

    chain = [e for e in (auth, auth_ok, room, start, ack, call, end) if e is not None]
    for earlier, later in zip(chain, chain[1:]):
        if later.ts_ms < earlier.ts_ms:
            violations.append(
                f"{later.kind} at {later.ts_ms} precedes {earlier.kind} at {earlier.ts_ms}"
            )

    if start is not None and ack is not None:
        delta = ack.ts_ms - start.ts_ms
        if delta > ack_deadline_ms:
            violations.append(f"ack after {delta} ms exceeds the {ack_deadline_ms} ms deadline")

    if end is not None and vacant is not None and vacant.ts_ms < end.ts_ms:
        violations.append("node flagged vacant before the session ended")

    inputs = trace.select("input", session_id=session_id)
    if len(inputs) < require_inputs:
        violations.append(f"expected >= {require_inputs} inputs, saw {len(inputs)}")
    if start is not None and end is not None:
        for event in inputs:
            if not start.ts_ms <= event.ts_ms <= end.ts_ms:
                violations.append(f"input at {event.ts_ms} outside the session window")

    return violations


def check_no_ack_flow(
    trace: Trace,
    node_id: str,
    ack_deadline_ms: float = ACK_DEADLINE_MS,
) -> list[str]:
    """The no-ACK probe path: node unavailable exactly at the deadline."""
    violations: list[str] = []
    probe = trace.first("session_start", node_id=node_id)
    unavailable = trace.first("node_unavailable", node_id=node_id)
    if probe is None:
        violations.append(f"no session_start probe recorded for node {node_id}")
    if unavailable is None:
        violations.append(f"node {node_id} never marked unavailable")
    if probe is not None and unavailable is not None:
        delta = unavailable.ts_ms - probe.ts_ms
        if delta != ack_deadline_ms:
            violations.append(
                f"unavailable after {delta} ms, expected exactly {ack_deadline_ms} ms"
            )
    if trace.select("ack", node_id=node_id):
        violations.append(f"unexpected ack from node {node_id}")
    return violations
