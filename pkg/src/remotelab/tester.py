"""Automated testing subsystem: virtual user, scheduler, availability ledger.

A check logs in as a normal user, enters the experiment, waits for the
stream, captures a baseline, actuates the rig, verifies motion with the
vision pipeline, compares scene similarity, reads the error pin, and leaves.
Failed checks produce exactly one notification. Daily aggregation follows the
three availability categories: every reading healthy (Online), hardware dead
in every reading (Offline), anything else with at least one issue (Partial).
"""

from __future__ import annotations

import itertools
import json
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .agent import PIN_ERROR
from .cloud import CloudError
from .cv import (
    PipelineParams,
    detect_moved_boxes,
    ssim,
    verify_motion,
)
from .physics import MM_PER_PX_ROD, MM_PER_PX_SIDE, steps_to_arc_mm, steps_to_mm
from .platform import Platform

STREAM_WAIT_MS = 5_000.0
RETRY_BACKOFF_MS = 2_000.0
SSIM_ALERT_THRESHOLD = 0.98

# Actuation scripts: what the virtual user does to each experiment kind.
FL_SCRIPT = [
    {"target": "screen", "steps": 500},
    {"target": "screen", "steps": -500},
]
VR_SCRIPT = [
    {"direction": "down", "steps": 2048},
    {"direction": "up", "steps": 2048},
]

FL_PARAMS = PipelineParams(mm_per_px=MM_PER_PX_SIDE)
VR_PARAMS = PipelineParams(
    mm_per_px=MM_PER_PX_ROD, invert_segment=True, segment_threshold=150
)


@dataclass
class SsimCheck:
    score: float
    threshold: float
    passed: bool


@dataclass
class CheckReport:
    report_id: str
    experiment_id: str
    timestamp_ms: float
    timestamp_iso: str
    stream_ok: bool = True
    cloud_connected: bool = True
    error_code: str | None = None
    motion_verdicts: list = field(default_factory=list)
    ssim_checks: list[SsimCheck] = field(default_factory=list)
    reasons: list[str] = field(default_factory=list)
    deferred: bool = False

    @property
    def overall(self) -> str:
        return "pass" if not self.reasons else "fail"

    @property
    def hardware_down(self) -> bool:
        """Cloud or stream leg dead: the node is unreachable, not just faulty."""
        return (not self.cloud_connected) or (not self.stream_ok)

    def to_dict(self) -> dict:
        return {
            "report_id": self.report_id,
            "experiment_id": self.experiment_id,
            "timestamp": self.timestamp_iso,
            "overall": self.overall,
            "stream_ok": self.stream_ok,
            "cloud_connected": self.cloud_connected,
            "error_code": self.error_code,
            "reasons": self.reasons,
            "deferred": self.deferred,
            "motion": [
                {
                    "commanded_mm": v.commanded_mm,
                    "observed_mm": v.observed_mm,
                    "tolerance_mm": v.tolerance_mm,
                    "passed": v.passed,
                    "reason": v.reason,
                }
                for v in self.motion_verdicts
            ],
            "ssim": [
                {"score": c.score, "threshold": c.threshold, "passed": c.passed}
                for c in self.ssim_checks
            ],
        }


class NotificationSink:
    """Failure notifications: file, stdout, or webhook with file fallback."""

    def __init__(self, descriptor: dict, fallback_path: str | Path | None = None):
        self.kind = descriptor.get("kind", "file")
        self.path = descriptor.get("path")
        self.url = descriptor.get("url")
        self.fallback_path = Path(fallback_path or "notifications-fallback.ndjson")
        self.delivery_log: list[str] = []
        self._delivered_ids: set[str] = set()

    def notify(self, report: CheckReport) -> dict | None:
        """Deliver exactly once per failed report; returns the delivery record."""
        if report.overall != "fail":
            return None
        if report.report_id in self._delivered_ids:
            return None
        self._delivered_ids.add(report.report_id)
        record = {
            "report_id": report.report_id,
            "experiment_id": report.experiment_id,
            "timestamp": report.timestamp_iso,
            "reasons": report.reasons,
        }
        payload = json.dumps(record)
        delivered_via = self.kind
        if self.kind == "stdout":
            print(f"[notify] {payload}")
        elif self.kind == "webhook":
            try:
                request = urllib.request.Request(
                    self.url,
                    data=json.dumps(report.to_dict()).encode("utf-8"),
                    headers={"Content-Type": "application/json"},
                )
                urllib.request.urlopen(request, timeout=5)
            except Exception:
                delivered_via = "fallback-file"
                self.fallback_path.parent.mkdir(parents=True, exist_ok=True)
                with self.fallback_path.open("a", encoding="utf-8") as fh:
                    fh.write(payload + "\n")
        else:
            target = Path(self.path)
            target.parent.mkdir(parents=True, exist_ok=True)
            with target.open("a", encoding="utf-8") as fh:
                fh.write(payload + "\n")
        record["via"] = delivered_via
        self.delivery_log.append(report.report_id)
        return record


class VirtualUser:
    """Drives a platform through the same surfaces a human client uses."""

    def __init__(self, platform: Platform, sink: NotificationSink | None = None):
        self.platform = platform
        self.sink = sink
        self._report_seq = itertools.count(1)
        self._peer_seq = itertools.count(1)
        self.ledger: list[CheckReport] = []
        self.reference_frames: dict[tuple, object] = {}
        self.skipped_slots = 0

    # -- plumbing ---------------------------------------------------------------

    def _experiment(self, experiment_id: str):
        for exp in self.platform.config.experiments:
            if exp.experiment_id == experiment_id:
                return exp
        raise KeyError(experiment_id)

    def _new_report(self, experiment_id: str) -> CheckReport:
        now = self.platform.scheduler.now_ms()
        return CheckReport(
            report_id=f"check-{next(self._report_seq)}",
            experiment_id=experiment_id,
            timestamp_ms=now,
            timestamp_iso=self.platform.scheduler.utc_at(now).isoformat(),
        )

    def _await_frames(self, peer_id: str, minimum: int, budget_ms: float) -> bool:
        waited = 0.0
        inbox = self.platform.broker.peer(peer_id).inbox
        while len(inbox) < minimum and waited < budget_ms:
            self.platform.run_for(100.0)
            waited += 100.0
        return len(inbox) >= minimum

    @staticmethod
    def _latest_frame_per_camera(inbox) -> dict[str, object]:
        frames: dict[str, object] = {}
        for _, _, frame in inbox:
            frames[frame.camera_id] = frame
        return frames

    # -- the check itself ----------------------------------------------------------

    def _watch_camera(self, exp, node_id: str) -> str:
        """Camera id of the view the vision check tracks on this node."""
        wanted = "side" if exp.kind == "FL" else "rod"
        node_spec = next(n for n in exp.nodes if n.node_id == node_id)
        for agent in node_spec.agents:
            for camera in agent.cameras:
                if camera.view == wanted:
                    return camera.camera_id
        raise KeyError(f"node {node_id} has no {wanted!r} camera")

    def run_check(
        self, experiment_id: str, mode: str = "full", _retried: bool = False
    ) -> CheckReport:
        """One automated verification pass.

        `full` actuates the rig and runs the vision checks; `smoke` only
        verifies stream liveness, connectivity and the error pin.
        """
        report = self._new_report(experiment_id)
        exp = self._experiment(experiment_id)
        orch = self.platform.orchestrator
        cfg = self.platform.config.tester
        token = orch.login(cfg.username, cfg.secret)
        peer_id = f"tester-peer-{next(self._peer_seq)}"
        self.platform.broker.register(peer_id)

        ticket = orch.enter_experiment(token, experiment_id, peer_id)
        self.platform.run_until_resolved(ticket)
        if ticket.state != "granted":
            if ticket.state == "queued" and not _retried:
                orch.leave_experiment(token, experiment_id)
                orch.logout(token)
                self.platform.broker.unregister(peer_id)
                self.platform.run_for(RETRY_BACKOFF_MS)
                return self.run_check(experiment_id, mode=mode, _retried=True)
            report.deferred = ticket.state == "queued"
            report.stream_ok = False
            report.reasons.append(f"entry-refused:{ticket.state}")
            self._finalize(report, token, experiment_id, ticket, peer_id)
            return report

        node_id = ticket.node_id
        node = orch.node_record(experiment_id, node_id)
        cameras = 2 if exp.kind == "FL" else 1

        # await the stream
        if not self._await_frames(peer_id, cameras, STREAM_WAIT_MS):
            report.stream_ok = False
            report.reasons.append("no-frame-within-5s")
            self._finalize(report, token, experiment_id, ticket, peer_id, node.cloud_token)
            return report

        if mode == "smoke":
            self._finalize(
                report, token, experiment_id, ticket, peer_id, node.cloud_token,
                settle=False,
            )
            return report

        # capture the rig's initial (homed) state
        baseline = self._capture(peer_id, cameras)
        if baseline is None:
            report.stream_ok = False
            report.reasons.append("stream-stalled")
            self._finalize(report, token, experiment_id, ticket, peer_id, node.cloud_token)
            return report

        # actuate and verify each scripted move
        script = FL_SCRIPT if exp.kind == "FL" else VR_SCRIPT
        params = FL_PARAMS if exp.kind == "FL" else VR_PARAMS
        watch_cam = self._watch_camera(exp, node_id)
        sim = self.platform.sims[node_id]
        for command in script:
            before = self._capture(peer_id, cameras)
            if before is None:
                report.stream_ok = False
                report.reasons.append("stream-stalled")
                break
            orch.submit_input(token, experiment_id, command)
            self._wait_for_motion(sim)
            after = self._capture(peer_id, cameras)
            if after is None:
                report.stream_ok = False
                report.reasons.append("stream-stalled")
                break
            commanded_mm = self._commanded_mm(exp.kind, sim, command)
            axis = "x" if exp.kind == "FL" else "y"
            result = detect_moved_boxes(
                before[watch_cam].pixels, after[watch_cam].pixels, params
            )
            verdict = verify_motion(
                commanded_mm, result, tolerance_mm=cfg.tolerance_mm, axis=axis
            )
            report.motion_verdicts.append(verdict)
            if not verdict.passed:
                report.reasons.append(f"motion:{verdict.reason}")

        # scene drift: the script returns the rig home, so the final frame must
        # match the reference scene remembered from the first healthy check
        # (catching slow changes between sessions, like evaporating water)
        if report.stream_ok:
            final = self._capture(peer_id, cameras)
            if final is not None:
                ref_key = (experiment_id, node_id, watch_cam)
                reference = self.reference_frames.get(ref_key, baseline[watch_cam])
                score = ssim(reference.pixels, final[watch_cam].pixels)
                check = SsimCheck(score, SSIM_ALERT_THRESHOLD, score >= SSIM_ALERT_THRESHOLD)
                report.ssim_checks.append(check)
                if not check.passed:
                    report.reasons.append(f"ssim:{score:.4f}<{SSIM_ALERT_THRESHOLD}")
                elif ref_key not in self.reference_frames and not report.reasons:
                    self.reference_frames[ref_key] = baseline[watch_cam]

        self._finalize(report, token, experiment_id, ticket, peer_id, node.cloud_token)
        return report

    def _capture(self, peer_id: str, cameras: int, budget_ms: float = STREAM_WAIT_MS):
        """Frames rendered from now on: stream latency means stale frames show
        an older rig state, so captures filter on the render timestamp."""
        fresh_after = self.platform.scheduler.now_ms()
        inbox = self.platform.broker.peer(peer_id).inbox
        waited = 0.0
        while waited < budget_ms:
            frames = {
                frame.camera_id: frame
                for _, _, frame in inbox
                if frame.timestamp_ms >= fresh_after
            }
            if len(frames) >= cameras:
                return frames
            self.platform.run_for(100.0)
            waited += 100.0
        return None

    def _wait_for_motion(self, sim, budget_ms: float = 60_000.0) -> None:
        waited = 0.0
        self.platform.run_for(50.0)
        while sim.busy(self.platform.scheduler.now_ms()) and waited < budget_ms:
            self.platform.run_for(100.0)
            waited += 100.0
        self.platform.run_for(500.0)  # let fresh frames propagate

    @staticmethod
    def _commanded_mm(kind: str, sim, command: dict) -> float:
        if kind == "FL":
            sign = 1 if command["steps"] >= 0 else -1
            return sign * steps_to_mm(abs(command["steps"]), sim.state.step_len_um)
        sign = 1 if command["direction"] == "down" else -1
        return sign * steps_to_arc_mm(
            command["steps"], sim.state.motor, sim.state.pulley_radius_mm
        )

    def _finalize(
        self,
        report: CheckReport,
        token: str,
        experiment_id: str,
        ticket,
        peer_id: str,
        cloud_token: str | None = None,
        settle: bool = True,
    ) -> None:
        orch = self.platform.orchestrator
        orch.leave_experiment(token, experiment_id)
        if settle and ticket.node_id is not None:
            # recalibration runs after leaving; poll it before the pin read so
            # a homing fault lands in this report, not the next one
            sim = self.platform.sims.get(ticket.node_id)
            waited = 0.0
            self.platform.run_for(500.0)
            while sim is not None and sim.recalibrating and waited < 60_000.0:
                self.platform.run_for(500.0)
                waited += 500.0
            self.platform.run_for(100.0)
        if cloud_token is not None:
            report.cloud_connected = self.platform.cloud.is_connected(cloud_token)
            if not report.cloud_connected:
                report.reasons.append("cloud-disconnected")
            try:
                error = self.platform.cloud.get_pin(cloud_token, PIN_ERROR)
            except CloudError:
                error = None
            if error is not None:
                report.error_code = str(error)
                report.reasons.append(f"error-code:{error}")
        orch.logout(token)
        self.platform.broker.unregister(peer_id)
        self.ledger.append(report)
        if self.sink is not None and report.overall == "fail":
            self.sink.notify(report)

    # -- cadence -------------------------------------------------------------------

    def run_schedule(
        self,
        horizon_ms: float,
        interval_ms: float = 8 * 3600 * 1000.0,
        experiment_ids: list[str] | None = None,
        mode: str = "full",
    ) -> list[CheckReport]:
        """Fire checks every interval until the horizon; skip overlapping slots."""
        if interval_ms <= 0:
            raise ValueError("interval must be positive")
        experiment_ids = experiment_ids or [
            e.experiment_id for e in self.platform.config.experiments
        ]
        reports: list[CheckReport] = []
        scheduler = self.platform.scheduler
        start = scheduler.now_ms()
        fire_at = start
        self.skipped_slots = 0
        while fire_at < start + horizon_ms:
            if scheduler.now_ms() > fire_at:
                # the previous round overran this slot: skip it, stay on grid
                self.skipped_slots += 1
                self.platform.trace.emit("check_slot_skipped", due_ms=fire_at)
                fire_at += interval_ms
                continue
            self.platform.run_for(fire_at - scheduler.now_ms())
            for experiment_id in experiment_ids:
                reports.append(self.run_check(experiment_id, mode=mode))
            fire_at += interval_ms
        return reports


# -- daily aggregation ----------------------------------------------------------------


@dataclass
class DailyStatus:
    date: str
    experiment_id: str
    status: str  # Online | Partial | Offline | no-data
    report_ids: list[str] = field(default_factory=list)


def aggregate_daily(date: str, experiment_id: str, readings: list[CheckReport]) -> DailyStatus:
    """Collapse one day of readings into Online, Partial, or Offline."""
    if not readings:
        return DailyStatus(date, experiment_id, "no-data")
    ids = [r.report_id for r in readings]
    if all(r.overall == "pass" for r in readings):
        return DailyStatus(date, experiment_id, "Online", ids)
    if all(r.hardware_down for r in readings):
        return DailyStatus(date, experiment_id, "Offline", ids)
    return DailyStatus(date, experiment_id, "Partial", ids)


def aggregate_ledger(reports: list[CheckReport]) -> list[DailyStatus]:
    """Group reports into (date, experiment) buckets and categorize each."""
    buckets: dict[tuple[str, str], list[CheckReport]] = {}
    for report in reports:
        date = report.timestamp_iso[:10]
        buckets.setdefault((date, report.experiment_id), []).append(report)
    return [
        aggregate_daily(date, experiment_id, readings)
        for (date, experiment_id), readings in sorted(buckets.items())
    ]


def uptime_summary(days: list[DailyStatus]) -> dict:
    """Per-experiment category counts and the fleet online fraction."""
    per_experiment: dict[str, dict] = {}
    for day in days:
        stats = per_experiment.setdefault(
            day.experiment_id,
            {"Online": 0, "Partial": 0, "Offline": 0, "no-data": 0, "days": 0},
        )
        stats[day.status] += 1
        stats["days"] += 1
    for stats in per_experiment.values():
        counted = stats["days"] - stats["no-data"]
        stats["online_fraction"] = stats["Online"] / counted if counted else 0.0
    total_online = sum(s["Online"] for s in per_experiment.values())
    total_days = sum(s["days"] - s["no-data"] for s in per_experiment.values())
    return {
        "experiments": per_experiment,
        "fleet_online_fraction": total_online / total_days if total_days else 0.0,
    }


# -- synthetic reading streams -----------------------------------------------------------


def synthesize_day_readings(
    experiment_id: str,
    date_iso: str,
    category: str,
    readings_per_day: int = 3,
    seq_start: int = 0,
) -> list[CheckReport]:
    """Readings engineered to aggregate into the given category.

    Online: every reading healthy. Partial: one stream glitch among healthy
    readings. Offline: hardware unreachable in every reading.
    """
    reports = []
    for i in range(readings_per_day):
        report = CheckReport(
            report_id=f"{experiment_id}-{date_iso}-{seq_start + i}",
            experiment_id=experiment_id,
            timestamp_ms=0.0,
            timestamp_iso=f"{date_iso}T{i * 8:02d}:00:00+00:00",
        )
        if category == "Offline":
            report.stream_ok = False
            report.cloud_connected = False
            report.reasons.append("cloud-disconnected")
        elif category == "Partial" and i == readings_per_day // 2:
            report.stream_ok = False
            report.reasons.append("no-frame-within-5s")
        reports.append(report)
    return reports


def synthesize_reading_stream(
    experiment_id: str,
    day_categories: list[str],
    start_date: str = "2023-07-01",
    readings_per_day: int = 3,
) -> list[CheckReport]:
    """A multi-day stream of readings following a per-day category plan."""
    from datetime import date, timedelta

    first = date.fromisoformat(start_date)
    reports: list[CheckReport] = []
    for offset, category in enumerate(day_categories):
        day = (first + timedelta(days=offset)).isoformat()
        reports.extend(
            synthesize_day_readings(
                experiment_id, day, category, readings_per_day, seq_start=offset * 10
            )
        )
    return reports


def day_plan(online: int, partial: int, offline: int, seed: int = 7) -> list[str]:
    """Shuffled day-category plan with exact counts."""
    import random

    plan = ["Online"] * online + ["Partial"] * partial + ["Offline"] * offline
    random.Random(seed).shuffle(plan)
    return plan


# -- ledger file I/O ---------------------------------------------------------------------


def append_ledger(path: str | Path, reports: list[CheckReport]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for report in reports:
            fh.write(json.dumps(report.to_dict()) + "\n")


def load_ledger(path: str | Path) -> list[CheckReport]:
    reports = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        raw = json.loads(line)
        report = CheckReport(
            report_id=raw["report_id"],
            experiment_id=raw["experiment_id"],
            timestamp_ms=0.0,
            timestamp_iso=raw["timestamp"],
            stream_ok=raw["stream_ok"],
            cloud_connected=raw["cloud_connected"],
            error_code=raw.get("error_code"),
            reasons=list(raw.get("reasons", [])),
            deferred=raw.get("deferred", False),
        )
        reports.append(report)
    return reports
