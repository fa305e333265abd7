"""Deterministic scenario driver: timed steps against an in-process platform.

A scenario is JSON: a config (inline or by path), a seed, and a list of timed
steps. Steps join/leave users, submit inputs, inject faults, run checks, and
assert expectations. The same config, seed and script produce a byte-identical
report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import PlatformConfig, default_config
from .platform import Platform
from .tester import NotificationSink, VirtualUser


class ScenarioError(Exception):
    pass


@dataclass
class StepResult:
    at_ms: float
    action: str
    ok: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    passed: bool = True
    steps: list[StepResult] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "violations": self.violations,
            "steps": [
                {"at_ms": s.at_ms, "action": s.action, "ok": s.ok, "detail": s.detail}
                for s in self.steps
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class ScenarioRunner:
    def __init__(self, script: dict, base_dir: Path | None = None):
        self.script = script
        self.name = script.get("name", "scenario")
        if "config" in script:
            config = PlatformConfig.from_dict(script["config"])
        elif "config_path" in script:
            path = Path(script["config_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            config = PlatformConfig.load(path)
        else:
            config = default_config()
        if "seed" in script:
            config.rng_seed = int(script["seed"])
        self.platform = Platform(config)
        self.virtual_user = VirtualUser(self.platform, _MemorySink(self))
        self.notifications: list[dict] = []
        self.tokens: dict[str, str] = {}
        self.tickets: dict[str, object] = {}
        self.last_report = None
        self.report = ScenarioReport(self.name)

    # -- helpers -----------------------------------------------------------------

    def _token(self, user: str) -> str:
        if user not in self.tokens:
            spec = next(
                (u for u in self.platform.config.users if u.username == user), None
            )
            if spec is None:
                raise ScenarioError(f"user {user!r} not in config")
            self.tokens[user] = self.platform.orchestrator.login(spec.username, spec.secret)
        return self.tokens[user]

    def _peer(self, user: str) -> str:
        peer = f"peer-{user}"
        if not self.platform.broker.is_registered(peer):
            self.platform.broker.register(peer)
        return peer

    # -- actions -----------------------------------------------------------------

    def _do_user_join(self, step: dict) -> str:
        user = step["user"]
        ticket = self.platform.orchestrator.enter_experiment(
            self._token(user), step["experiment"], self._peer(user)
        )
        self.tickets[user] = ticket
        self.platform.run_until_resolved(ticket)
        return f"{user}:{ticket.state}"

    def _do_user_leave(self, step: dict) -> str:
        user = step["user"]
        result = self.platform.orchestrator.leave_experiment(
            self._token(user), step["experiment"]
        )
        return f"{user}:{result['left']}"

    def _do_input(self, step: dict) -> str:
        outcome = self.platform.orchestrator.submit_input(
            self._token(step["user"]), step["experiment"], step["params"]
        )
        return f"accepted:{outcome['accepted']}"

    def _do_fault(self, step: dict) -> str:
        sim = self.platform.sims[step["node"]]
        for key, value in step["set"].items():
            if not hasattr(sim.faults, key):
                raise ScenarioError(f"unknown fault field {key!r}")
            setattr(sim.faults, key, value)
        return f"{step['node']}:{step['set']}"

    def _do_run_check(self, step: dict) -> str:
        self.last_report = self.virtual_user.run_check(
            step["experiment"], mode=step.get("mode", "full")
        )
        return f"{self.last_report.report_id}:{self.last_report.overall}"

    def _do_disconnect_device(self, step: dict) -> str:
        agent = self.platform.agents[step["device"]]
        if agent._channel is not None:
            agent._channel.close()
        return step["device"]

    def _do_connect_device(self, step: dict) -> str:
        self.platform.connect_agent(step["device"])
        return step["device"]

    def _do_expect(self, step: dict) -> str:
        check = step["check"]
        actual = self._evaluate(check, step)
        expected = step.get("equals")
        tolerance = step.get("tolerance")
        if tolerance is not None:
            ok = actual is not None and abs(actual - expected) <= tolerance
        else:
            ok = actual == expected
        detail = f"{check}: expected {expected!r}, got {actual!r}"
        if not ok:
            self.report.violations.append(f"at {step.get('at_ms', 0)} ms: {detail}")
            self.report.passed = False
        return detail

    def _evaluate(self, check: str, step: dict):
        orch = self.platform.orchestrator
        if check == "entry_state":
            ticket = self.tickets.get(step["user"])
            return None if ticket is None else ticket.state
        if check == "queue_position":
            status = orch.queue_status(self._token(step["user"]), step["experiment"])
            return status.get("token")
        if check == "session_status":
            return orch.queue_status(self._token(step["user"]), step["experiment"])["status"]
        if check == "node_occupancy":
            exp = step.get("experiment") or self._experiment_of_node(step["node"])
            return orch.node_record(exp, step["node"]).occupancy
        if check == "active_sessions":
            return len(orch.active_sessions())
        if check == "last_report":
            return None if self.last_report is None else self.last_report.overall
        if check == "last_report_reason_prefix":
            if self.last_report is None:
                return None
            prefix = step["prefix"]
            return any(r.startswith(prefix) for r in self.last_report.reasons)
        if check == "notifications":
            return len(self.notifications)
        if check == "pin":
            return self.platform.cloud.get_pin(step["token"], step["pin"])
        raise ScenarioError(f"unknown expectation {check!r}")

    def _experiment_of_node(self, node_id: str) -> str:
        for exp in self.platform.config.experiments:
            for node in exp.nodes:
                if node.node_id == node_id:
                    return exp.experiment_id
        raise ScenarioError(f"unknown node {node_id!r}")

    # -- main loop ------------------------------------------------------------------

    ACTIONS = {
        "user_join": _do_user_join,
        "user_leave": _do_user_leave,
        "input": _do_input,
        "fault": _do_fault,
        "run_check": _do_run_check,
        "expect": _do_expect,
        "disconnect_device": _do_disconnect_device,
        "connect_device": _do_connect_device,
    }

    def run(self) -> ScenarioReport:
        self.platform.start()
        steps = sorted(self.script.get("steps", []), key=lambda s: s.get("at_ms", 0))
        for step in steps:
            at_ms = float(step.get("at_ms", 0))
            now = self.platform.scheduler.now_ms()
            if at_ms > now:
                self.platform.run_for(at_ms - now)
            action = step.get("action")
            handler = self.ACTIONS.get(action)
            if handler is None:
                raise ScenarioError(f"unknown action {action!r}")
            try:
                detail = handler(self, step)
                ok = True
            except ScenarioError:
                raise
            except Exception as exc:  # noqa: BLE001 - recorded, scenario continues
                detail = f"{type(exc).__name__}: {exc}"
                ok = False
                if not step.get("may_fail", False):
                    self.report.violations.append(
                        f"at {at_ms} ms: {action} raised {detail}"
                    )
                    self.report.passed = False
            self.report.steps.append(StepResult(at_ms, action, ok, detail))
        final_ms = float(self.script.get("run_until_ms", 0))
        if final_ms > self.platform.scheduler.now_ms():
            self.platform.run_for(final_ms - self.platform.scheduler.now_ms())
        return self.report


class _MemorySink(NotificationSink):
    """Sink that records deliveries on the runner, for expectations."""

    def __init__(self, runner: ScenarioRunner):
        super().__init__({"kind": "stdout"})
        self._runner = runner

    def notify(self, report) -> dict | None:
        if report.overall != "fail" or report.report_id in self._delivered_ids:
            return None
        self._delivered_ids.add(report.report_id)
        record = {"report_id": report.report_id, "reasons": list(report.reasons)}
        self._runner.notifications.append(record)
        self.delivery_log.append(report.report_id)
        return record


def run_scenario_file(path: str | Path) -> ScenarioReport:
    path = Path(path)
    script = json.loads(path.read_text())
    return ScenarioRunner(script, base_dir=path.parent).run()
