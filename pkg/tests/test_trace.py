from remotelab.trace import Trace, check_no_ack_flow, check_session_flow


def conformant_trace() -> Trace:
    trace = Trace()
    trace.emit("auth", ts_ms=0, device_id="dev", node_id="n1")
    trace.emit("auth_ok", ts_ms=1, device_id="dev", node_id="n1")
    trace.emit("room_join", ts_ms=1, device_id="dev", node_id="n1")
    trace.emit("session_start", ts_ms=100, session_id="s1", node_id="n1")
    trace.emit("ack", ts_ms=150, session_id="s1", device_id="dev", node_id="n1")
    trace.emit("call", ts_ms=151, session_id="s1", device_id="dev")
    trace.emit("input", ts_ms=500, session_id="s1")
    trace.emit("input", ts_ms=900, session_id="s1")
    trace.emit("session_end", ts_ms=2000, session_id="s1", node_id="n1")
    trace.emit("flag_vacant", ts_ms=2001, node_id="n1")
    return trace


def test_conformant_flow_has_no_violations():
    violations = check_session_flow(
        conformant_trace(), "s1", "dev", "n1", require_inputs=2
    )
    assert violations == []


def test_missing_ack_detected():
    trace = Trace()
    trace.emit("auth", ts_ms=0, device_id="dev")
    violations = check_session_flow(trace, "s1", "dev", "n1")
    assert any("missing ack" in v for v in violations)
    assert any("missing session_start" in v for v in violations)


def test_late_ack_detected():
    trace = conformant_trace()
    # shift the ack past the deadline
    trace.events = [e for e in trace.events if e.kind != "ack"]
    trace.emit("ack", ts_ms=5200, session_id="s1", device_id="dev", node_id="n1")
    violations = check_session_flow(trace, "s1", "dev", "n1")
    assert any("deadline" in v for v in violations)


def test_out_of_order_detected():
    trace = Trace()
    trace.emit("auth", ts_ms=100, device_id="dev")
    trace.emit("auth_ok", ts_ms=50, device_id="dev")  # before auth: wrong
    trace.emit("room_join", ts_ms=60, device_id="dev")
    trace.emit("session_start", ts_ms=70, session_id="s1", node_id="n1")
    trace.emit("ack", ts_ms=75, session_id="s1", device_id="dev")
    trace.emit("call", ts_ms=76, session_id="s1")
    trace.emit("session_end", ts_ms=80, session_id="s1")
    trace.emit("flag_vacant", ts_ms=81, node_id="n1")
    violations = check_session_flow(trace, "s1", "dev", "n1")
    assert any("precedes" in v for v in violations)


def test_input_outside_session_window_detected():
    trace = conformant_trace()
    trace.emit("input", ts_ms=9999, session_id="s1")
    violations = check_session_flow(trace, "s1", "dev", "n1")
    assert any("outside the session window" in v for v in violations)


def test_vacant_before_end_detected():
    trace = Trace()
    trace.emit("auth", ts_ms=0, device_id="dev")
    trace.emit("auth_ok", ts_ms=1, device_id="dev")
    trace.emit("room_join", ts_ms=1, device_id="dev")
    trace.emit("session_start", ts_ms=10, session_id="s1", node_id="n1")
    trace.emit("ack", ts_ms=11, session_id="s1", device_id="dev")
    trace.emit("call", ts_ms=12, session_id="s1")
    trace.emit("flag_vacant", ts_ms=500, node_id="n1")
    trace.emit("session_end", ts_ms=1000, session_id="s1", node_id="n1")
    violations = check_session_flow(trace, "s1", "dev", "n1")
    assert any("vacant before" in v for v in violations)


def test_no_ack_flow_checker():
    trace = Trace()
    trace.emit("session_start", ts_ms=100, session_id="s1", node_id="n1")
    trace.emit("node_unavailable", ts_ms=5100, node_id="n1", reason="stream")
    assert check_no_ack_flow(trace, "n1") == []

    late = Trace()
    late.emit("session_start", ts_ms=100, session_id="s1", node_id="n1")
    late.emit("node_unavailable", ts_ms=5200, node_id="n1", reason="stream")
    assert any("expected exactly" in v for v in check_no_ack_flow(late, "n1"))

    silent = Trace()
    assert len(check_no_ack_flow(silent, "n1")) == 2
