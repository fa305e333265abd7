"""Simulated hardware node agents.

A node couples one control agent (motors plus a camera) with optional
stream-only agents (extra cameras). All agents of a node share a NodeSim that
owns the physics state and motion ramps; the control agent mutates it through
commands and recalibration, every agent renders frames from it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

from .cloud import CloudError, PinCloud
from .clock import Scheduler, TimerHandle
from .physics import Frame, LensBenchState, RodRigState, render_frame, travel_time_ms
from .protocol import (
    MSG_ACK,
    MSG_AUTH,
    MSG_AUTH_FAIL,
    MSG_AUTH_OK,
    MSG_COMMAND,
    MSG_ERROR,
    MSG_SESSION_END,
    MSG_SESSION_START,
    Channel,
)
from .signaling import SignalingBroker, SignalingError
from .trace import Trace

ERROR_CODES = {
    "E01": "motor-driver-fault",
    "E02": "limit-switch-timeout",
    "E03": "threshold-exceeded",
    "E10": "camera-failure",
    "E20": "cloud-unreachable",
}

# Pin assignments shared by server, devices and the checker.
PIN_OUTPUT_U = "V0"  # FL: object distance (cm); VR: rod lowering (mm)
PIN_OUTPUT_V = "V1"  # FL: screen distance (cm)
PIN_FLAG = "V2"
PIN_ERROR = "V9"

FRAME_INTERVAL_MS = 200.0  # 5 fps
DEFAULT_SESSION_DURATION_S = 300.0


@dataclass
class CameraConfig:
    camera_id: str
    view: str  # screen | side | rod
    profile: str = "pi3b"


@dataclass
class FaultConfig:
    """Reproducible fault injection, toggled by tests and scenarios."""

    driver_fault: bool = False
    motor_stall: float = 0.0  # fraction of commanded travel silently lost
    stuck_limit_switch: bool = False
    camera_failure: bool = False
    cloud_unreachable: bool = False


@dataclass
class AgentConfig:
    device_id: str
    experiment_id: str
    node_id: str
    credentials: str
    cloud_token: str
    cameras: list[CameraConfig]
    role: str = "control"  # control | stream-only
    session_duration_s: float = DEFAULT_SESSION_DURATION_S
    frame_interval_ms: float = FRAME_INTERVAL_MS
    rng_seed: int = 0
    render_enabled: bool = True
    noise_sigma: float = 2.0

    def __post_init__(self):
        if not self.cameras:
            raise ValueError(f"agent {self.device_id}: at least one camera required")
        if not self.credentials:
            raise ValueError(f"agent {self.device_id}: credentials must be non-empty")
        if self.role not in ("control", "stream-only"):
            raise ValueError(f"agent {self.device_id}: bad role {self.role!r}")


@dataclass
class _Motion:
    axis: str
    start_steps: int
    end_steps: int
    t0_ms: float
    t1_ms: float

    def position(self, now_ms: float) -> int:
        if now_ms >= self.t1_ms:
            return self.end_steps
        if now_ms <= self.t0_ms or self.t1_ms == self.t0_ms:
            return self.start_steps
        frac = (now_ms - self.t0_ms) / (self.t1_ms - self.t0_ms)
        return int(round(self.start_steps + frac * (self.end_steps - self.start_steps)))


class NodeSim:
    """Physics state of one hardware node, shared by its agents."""

    def __init__(
        self,
        kind: str,
        state: LensBenchState | RodRigState,
        faults: FaultConfig | None = None,
    ):
        if kind not in ("FL", "VR"):
            raise ValueError(f"unknown experiment kind {kind!r}")
        self.kind = kind
        self.state = state
        self.faults = faults or FaultConfig()
        self.recalibrating = False
        self._motions: dict[str, _Motion] = {}
        self._lock = threading.RLock()

    def axis_position(self, axis: str, now_ms: float) -> int:
        with self._lock:
            motion = self._motions.get(axis)
            if motion is not None:
                return motion.position(now_ms)
            return getattr(self.state, axis)

    def busy(self, now_ms: float) -> bool:
        with self._lock:
            if self.recalibrating:
                return True
            return any(m.t1_ms > now_ms for m in self._motions.values())

    def begin_move(self, axis: str, target_steps: int, now_ms: float) -> float:
        """Start a ramp on `axis`; returns the completion time."""
        with self._lock:
            start = self.axis_position(axis, now_ms)
            duration = travel_time_ms(target_steps - start, self.state.motor)
            motion = _Motion(axis, start, target_steps, now_ms, now_ms + duration)
            self._motions[axis] = motion
            return motion.t1_ms

    def finish_move(self, axis: str, now_ms: float) -> None:
        with self._lock:
            motion = self._motions.pop(axis, None)
            if motion is not None:
                self.state = replace(self.state, **{axis: motion.position(now_ms)})

    def snapshot(self, now_ms: float) -> LensBenchState | RodRigState:
        """State with in-flight motions interpolated, for rendering."""
        with self._lock:
            if not self._motions:
                return self.state
            updates = {axis: m.position(now_ms) for axis, m in self._motions.items()}
            return replace(self.state, **updates)

    def set_state(self, state: LensBenchState | RodRigState) -> None:
        with self._lock:
            self._motions.clear()
            self.state = state

    @property
    def axes(self) -> tuple[str, ...]:
        return ("u_steps", "v_steps") if self.kind == "FL" else ("rod_height_steps",)


class DeviceAgent:
    """One simulated Raspberry Pi: authorizes, streams, executes, recalibrates."""

    def __init__(
        self,
        config: AgentConfig,
        sim: NodeSim,
        scheduler: Scheduler,
        cloud: PinCloud,
        broker: SignalingBroker,
        trace: Trace | None = None,
    ):
        self.config = config
        self.sim = sim
        self._scheduler = scheduler
        self._cloud = cloud
        self._broker = broker
        self._trace = trace or Trace()
        self.phase = "disconnected"
        self.current_peer: str | None = None
        self.session_id: str | None = None
        self.session_deadline_ms: float | None = None
        self._channel: Channel | None = None
        self._media_sessions: list = []
        self._session_timer: TimerHandle | None = None
        self._frame_timer: TimerHandle | None = None
        self._heartbeat_timer: TimerHandle | None = None
        self._frame_counter = 0
        self._camera_fault_reported = False

    # -- lifecycle -------------------------------------------------------------

    def connect(self, channel: Channel) -> None:
        """Bind a fresh channel to the server and authorize over it."""
        self.phase = "disconnected"
        self._channel = channel
        channel.on_message(self._handle_message)
        channel.on_close(self._handle_channel_close)
        self._send(
            {
                "type": MSG_AUTH,
                "device_id": self.config.device_id,
                "experiment_id": self.config.experiment_id,
                "node_id": self.config.node_id,
                "credentials": self.config.credentials,
                "role": self.config.role,
            }
        )
        self._trace.emit("auth", device_id=self.config.device_id, node_id=self.config.node_id)

    def _send(self, message: dict) -> None:
        if self._channel is not None and not getattr(self._channel, "closed", False):
            self._channel.send(message)

    def _handle_channel_close(self) -> None:
        if self.phase == "in_session":
            self._teardown_session("channel-loss", notify_server=False)
        self.phase = "disconnected"
        self._stop_heartbeats()
        for camera in self.config.cameras:
            try:
                self._broker.unregister(camera.camera_id)
            except SignalingError:
                pass

    def _handle_message(self, message: dict) -> None:
        mtype = message.get("type")
        if mtype == MSG_AUTH_OK:
            self._on_authorized()
        elif mtype == MSG_AUTH_FAIL:
            self.phase = "disconnected"
        elif mtype == MSG_SESSION_START:
            self._on_session_start(message)
        elif mtype == MSG_SESSION_END:
            # a stale end (for a probe or an already-ended session) must not
            # tear down a newer session on this node
            target = message.get("session_id")
            if target is None or target == self.session_id:
                self.end_session(message.get("reason", "user-left"))
        elif mtype == MSG_COMMAND:
            self.run_command(message.get("params", {}))

    def _on_authorized(self) -> None:
        self.phase = "idle"
        self._trace.emit("agent_idle", device_id=self.config.device_id)
        for camera in self.config.cameras:
            if not self._broker.is_registered(camera.camera_id):
                self._broker.register(camera.camera_id)
        self._start_heartbeats()
        if self.config.role == "control":
            self._write_output_pins()

    # -- cloud presence ----------------------------------------------------------

    def _start_heartbeats(self) -> None:
        self._stop_heartbeats()

        def beat():
            if self.phase == "disconnected":
                return
            if not self.sim.faults.cloud_unreachable:
                try:
                    self._cloud.heartbeat(self.config.cloud_token)
                except CloudError:
                    pass
            self._heartbeat_timer = self._scheduler.call_later(3_000.0, beat)

        beat()

    def _stop_heartbeats(self) -> None:
        if self._heartbeat_timer is not None:
            self._heartbeat_timer.cancel()
            self._heartbeat_timer = None

    # -- session handling ----------------------------------------------------------

    def _on_session_start(self, message: dict) -> None:
        if self.phase != "idle":
            return  # withhold the ack; the server treats the node unavailable
        session_id = message["session_id"]
        user_peer = message["user_peer_id"]
        self.phase = "in_session"
        self.session_id = session_id
        self.current_peer = user_peer
        self._send(
            {
                "type": MSG_ACK,
                "session_id": session_id,
                "device_id": self.config.device_id,
                "node_id": self.config.node_id,
            }
        )
        self._trace.emit(
            "ack",
            session_id=session_id,
            device_id=self.config.device_id,
            node_id=self.config.node_id,
        )
        self._media_sessions = []
        for camera in self.config.cameras:
            if self.sim.faults.camera_failure:
                self._report_error("E10", f"camera {camera.camera_id} failed to start")
                continue
            try:
                media = self._broker.call(camera.camera_id, user_peer, camera.profile)
            except SignalingError as exc:
                self._report_error("E10", f"call failed: {exc}")
                continue
            self._trace.emit(
                "call",
                session_id=session_id,
                device_id=self.config.device_id,
                node_id=self.config.node_id,
                camera_id=camera.camera_id,
                media_session=media.session_id,
            )
            self._media_sessions.append((camera, media))

        duration_ms = self.config.session_duration_s * 1000.0
        self.session_deadline_ms = self._scheduler.now_ms() + duration_ms
        self._session_timer = self._scheduler.call_later(
            duration_ms, lambda: self.end_session("timeout")
        )
        self._frame_counter = 0
        self._camera_fault_reported = False
        self._schedule_frame_tick()

    def _schedule_frame_tick(self) -> None:
        def tick():
            if self.phase != "in_session":
                return
            self._publish_frames()
            self._frame_timer = self._scheduler.call_later(self.config.frame_interval_ms, tick)

        tick()

    def _publish_frames(self) -> None:
        now = self._scheduler.now_ms()
        for camera, media in self._media_sessions:
            if self.sim.faults.camera_failure:
                if not self._camera_fault_reported:
                    self._camera_fault_reported = True
                    self._report_error("E10", f"camera {camera.camera_id} stopped")
                continue
            if self.config.render_enabled:
                frame = render_frame(
                    self.sim.snapshot(now),
                    camera.view,
                    seed=self.config.rng_seed + self._frame_counter,
                    noise_sigma=self.config.noise_sigma,
                    timestamp_ms=now,
                    camera_id=camera.camera_id,
                )
            else:
                frame = Frame(
                    [[0, 0], [0, 0]], timestamp_ms=now, camera_id=camera.camera_id
                )
            frame.seq = self._frame_counter
            try:
                self._broker.publish_frame(media.session_id, frame)
            except SignalingError:
                continue
        self._frame_counter += 1

    # -- commands ------------------------------------------------------------------

    def run_command(self, params: dict) -> None:
        if self.config.role != "control":
            return
        if self.phase != "in_session":
            self._send_error_msg("not-in-session", "command outside a session")
            return
        now = self._scheduler.now_ms()
        if self.sim.busy(now):
            self._send_error_msg("busy", "previous motion still running")
            return
        try:
            axis, delta = self._parse_command(params)
        except ValueError as exc:
            self._send_error_msg("bad-params", str(exc))
            return
        if self.sim.faults.driver_fault:
            self._report_error("E01", "stepper driver fault")
            return

        current = self.sim.axis_position(axis, now)
        target = current + delta
        clamped = self.sim.state.clamp(target)
        if clamped != target:
            self._report_error(
                "E03", f"travel limit: commanded {target} on {axis}, clamped to {clamped}"
            )
        if self.sim.faults.motor_stall:
            moved = int(round((clamped - current) * (1.0 - self.sim.faults.motor_stall)))
            actual = current + moved
        else:
            actual = clamped
        t_done = self.sim.begin_move(axis, actual, now)
        self._trace.emit(
            "command",
            device_id=self.config.device_id,
            session_id=self.session_id,
            axis=axis,
            delta=delta,
        )

        def finish():
            self.sim.finish_move(axis, self._scheduler.now_ms())
            self._write_output_pins()
            self._trace.emit(
                "command_done", device_id=self.config.device_id, axis=axis, position=actual
            )

        self._scheduler.call_at(t_done, finish)

    def _parse_command(self, params: dict) -> tuple[str, int]:
        if self.sim.kind == "FL":
            target = params.get("target")
            if target not in ("object", "screen"):
                raise ValueError(f"target must be object|screen, got {target!r}")
            steps = params.get("steps")
            if not isinstance(steps, int) or isinstance(steps, bool):
                raise ValueError(f"steps must be a signed integer, got {steps!r}")
            return ("u_steps" if target == "object" else "v_steps", steps)
        direction = params.get("direction")
        if direction not in ("up", "down"):
            raise ValueError(f"direction must be up|down, got {direction!r}")
        steps = params.get("steps")
        if not isinstance(steps, int) or isinstance(steps, bool) or steps < 0:
            raise ValueError(f"steps must be an unsigned integer, got {steps!r}")
        return ("rod_height_steps", steps if direction == "down" else -steps)

    def _write_output_pins(self) -> None:
        if self.sim.faults.cloud_unreachable:
            self._send_error_msg("E20", "cloud unreachable while writing outputs")
            return
        try:
            state = self.sim.state
            if self.sim.kind == "FL":
                self._cloud.update_pin(self.config.cloud_token, PIN_OUTPUT_U, state.u_cm)
                self._cloud.update_pin(self.config.cloud_token, PIN_OUTPUT_V, state.v_cm)
            else:
                self._cloud.update_pin(
                    self.config.cloud_token, PIN_OUTPUT_U, round(state.lowered_mm, 4)
                )
        except CloudError as exc:
            self._send_error_msg("E20", f"pin write failed: {exc}")

    # -- recalibration ---------------------------------------------------------------

    def recalibrate(self) -> None:
        """Home toward the virtual limit switches, then move to the home offsets."""
        if self.config.role != "control":
            return
        now = self._scheduler.now_ms()
        if self.sim.busy(now):
            self._send_error_msg("busy", "cannot recalibrate mid-motion")
            return
        self.sim.recalibrating = True
        state = self.sim.state
        motor = state.motor

        if self.sim.faults.stuck_limit_switch:
            # the switch never triggers: the motor sweeps the full travel and trips the guard
            max_steps = state.max_steps if self.sim.kind == "FL" else state.travel_steps
            duration = travel_time_ms(max_steps, motor)

            def fail():
                self.sim.recalibrating = False
                self._report_error("E02", "limit switch did not trigger within max travel")
                self._trace.emit("recalibrate_failed", device_id=self.config.device_id)

            self._scheduler.call_later(duration, fail)
            return

        if self.sim.kind == "FL":
            to_switch = max(state.u_steps, state.v_steps)
            to_home = max(state.home_u_steps, state.home_v_steps)
            homed = state.homed()
        else:
            to_switch = state.rod_height_steps
            to_home = 0
            homed = state.homed()
        duration = travel_time_ms(to_switch, motor) + travel_time_ms(to_home, motor)

        def finish():
            self.sim.set_state(homed)
            self.sim.recalibrating = False
            self._write_output_pins()
            self._trace.emit("recalibrated", device_id=self.config.device_id)

        self._scheduler.call_later(duration, finish)

    # -- session end ------------------------------------------------------------------

    def end_session(self, reason: str) -> None:
        if self.phase != "in_session":
            return
        self._teardown_session(reason, notify_server=True)
        if self.config.role == "control":
            self.recalibrate()

    def _teardown_session(self, reason: str, notify_server: bool) -> None:
        session_id = self.session_id
        if self._session_timer is not None:
            self._session_timer.cancel()
            self._session_timer = None
        if self._frame_timer is not None:
            self._frame_timer.cancel()
            self._frame_timer = None
        for _, media in self._media_sessions:
            try:
                self._broker.hangup(media.session_id, reason)
            except SignalingError:
                pass
        self._media_sessions = []
        self.phase = "idle"
        self.current_peer = None
        self.session_id = None
        self.session_deadline_ms = None
        if notify_server:
            self._send(
                {
                    "type": MSG_SESSION_END,
                    "session_id": session_id,
                    "device_id": self.config.device_id,
                    "node_id": self.config.node_id,
                    "reason": reason,
                }
            )
        self._trace.emit(
            "agent_session_end",
            session_id=session_id,
            device_id=self.config.device_id,
            reason=reason,
        )

    # -- errors -------------------------------------------------------------------------

    def _report_error(self, code: str, detail: str) -> None:
        """Fault path: error pin on the cloud plus an ERROR message to the server."""
        assert code in ERROR_CODES, code
        if not self.sim.faults.cloud_unreachable:
            try:
                self._cloud.update_pin(self.config.cloud_token, PIN_ERROR, code)
            except CloudError:
                pass
        self._send_error_msg(code, detail)

    def _send_error_msg(self, code: str, detail: str) -> None:
        self._trace.emit(
            "error", device_id=self.config.device_id, code=code, detail=detail
        )
        self._send(
            {
                "type": MSG_ERROR,
                "device_id": self.config.device_id,
                "node_id": self.config.node_id,
                "code": code,
                "detail": detail,
            }
        )
