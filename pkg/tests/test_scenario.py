import json
from dataclasses import asdict

from remotelab.config import default_config
from remotelab.scenario import ScenarioRunner, run_scenario_file


def multiplexing_script():
    config = asdict(default_config(fl_nodes=3, users=5, session_duration_s=120.0))
    return {
        "name": "multiplexing",
        "config": config,
        "steps": [
            {"at_ms": 100, "action": "user_join", "user": "user-1", "experiment": "focal-length"},
            {"at_ms": 200, "action": "user_join", "user": "user-2", "experiment": "focal-length"},
            {"at_ms": 300, "action": "user_join", "user": "user-3", "experiment": "focal-length"},
            {"at_ms": 400, "action": "user_join", "user": "user-4", "experiment": "focal-length"},
            {"at_ms": 500, "action": "expect", "check": "entry_state", "user": "user-1", "equals": "granted"},
            {"at_ms": 500, "action": "expect", "check": "entry_state", "user": "user-2", "equals": "granted"},
            {"at_ms": 500, "action": "expect", "check": "entry_state", "user": "user-3", "equals": "granted"},
            {"at_ms": 500, "action": "expect", "check": "entry_state", "user": "user-4", "equals": "queued"},
            {"at_ms": 600, "action": "expect", "check": "queue_position", "user": "user-4", "experiment": "focal-length", "equals": 1},
            {"at_ms": 700, "action": "expect", "check": "active_sessions", "equals": 3},
        ],
    }


def test_multiplexing_scenario_passes():
    report = ScenarioRunner(multiplexing_script()).run()
    assert report.passed, report.violations
    assert len(report.steps) == 10


def test_timeout_scenario_auto_frees_node():
    config = asdict(default_config(fl_nodes=1, users=3, session_duration_s=30.0))
    script = {
        "name": "timeout",
        "config": config,
        "steps": [
            {"at_ms": 100, "action": "user_join", "user": "user-1", "experiment": "focal-length"},
            {"at_ms": 300, "action": "user_join", "user": "user-2", "experiment": "focal-length"},
            {"at_ms": 400, "action": "expect", "check": "entry_state", "user": "user-2", "equals": "queued"},
            # the 30 s device timer expires; the queue head is auto-granted
            {"at_ms": 32_000, "action": "expect", "check": "session_status", "user": "user-2", "experiment": "focal-length", "equals": "granted"},
            {"at_ms": 32_000, "action": "expect", "check": "session_status", "user": "user-1", "experiment": "focal-length", "equals": "idle"},
        ],
    }
    report = ScenarioRunner(script).run()
    assert report.passed, report.violations


def test_fault_scenario_fails_check_and_notifies():
    config = asdict(default_config(fl_nodes=1, users=2, session_duration_s=300.0))
    script = {
        "name": "stalled-motor",
        "config": config,
        "steps": [
            {"at_ms": 100, "action": "fault", "node": "fl-1", "set": {"motor_stall": 0.6}},
            {"at_ms": 200, "action": "run_check", "experiment": "focal-length"},
            {"at_ms": 200, "action": "expect", "check": "last_report", "equals": "fail"},
            {
                "at_ms": 200,
                "action": "expect",
                "check": "last_report_reason_prefix",
                "prefix": "motion:",
                "equals": True,
            },
            {"at_ms": 200, "action": "expect", "check": "notifications", "equals": 1},
        ],
    }
    report = ScenarioRunner(script).run()
    assert report.passed, report.violations


def test_failed_expectation_reported():
    script = multiplexing_script()
    script["steps"].append(
        {"at_ms": 800, "action": "expect", "check": "active_sessions", "equals": 99}
    )
    report = ScenarioRunner(script).run()
    assert not report.passed
    assert any("active_sessions" in v for v in report.violations)


def test_scenario_reports_are_deterministic():
    a = ScenarioRunner(multiplexing_script()).run().to_json()
    b = ScenarioRunner(multiplexing_script()).run().to_json()
    assert a == b


def test_scenario_file_round_trip(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(multiplexing_script()))
    report = run_scenario_file(path)
    assert report.passed


def test_device_disconnect_and_reconnect():
    config = asdict(default_config(fl_nodes=1, users=2))
    script = {
        "name": "reconnect",
        "config": config,
        "steps": [
            {"at_ms": 100, "action": "disconnect_device", "device": "fl-1-ctrl"},
            {"at_ms": 5_000, "action": "connect_device", "device": "fl-1-ctrl"},
            {"at_ms": 6_000, "action": "user_join", "user": "user-1", "experiment": "focal-length"},
            {"at_ms": 6_500, "action": "expect", "check": "entry_state", "user": "user-1", "equals": "granted"},
        ],
    }
    report = ScenarioRunner(script).run()
    assert report.passed, report.violations
