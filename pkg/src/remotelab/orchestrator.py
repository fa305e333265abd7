"""Backend orchestrator: accounts, availability checks, multiplexing, queues.

One dispatcher per experiment serializes all node and queue transitions. A
grant is only issued after the triple check passes in one window: the node's
cloud presence, a vacant occupancy flag, and a live acknowledgement of the
real session-start probe within the deadline.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .agent import PIN_FLAG
from .cloud import FLAG_OCCUPIED, FLAG_VACANT, CloudError, PinCloud
from .clock import Scheduler, TimerHandle
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
from .trace import Trace

ACK_DEADLINE_MS = 5_000.0
SESSION_GRACE_MS = 1_000.0
QUEUE_IDLE_EXPIRY_MS = 30 * 60 * 1000.0
SLOT_GRANULARITY_MS = 30 * 60 * 1000.0

PIN_INPUT_A = "V3"  # FL: target; VR: direction
PIN_INPUT_B = "V4"  # steps


class OrchestratorError(Exception):
    status = 400


class AuthError(OrchestratorError):
    status = 401


class PermissionError_(OrchestratorError):
    status = 403


class NotFoundError(OrchestratorError):
    status = 404


class ValidationError(OrchestratorError):
    status = 400


class ConflictError(OrchestratorError):
    status = 409

    def __init__(self, message: str, next_free_iso: str | None = None):
        super().__init__(message)
        self.next_free_iso = next_free_iso


class ExperimentOfflineError(OrchestratorError):
    status = 503


@dataclass
class DeviceDirectoryEntry:
    device_id: str
    experiment_id: str
    node_id: str
    credentials: str
    role: str
    cloud_token: str


@dataclass
class NodeRecord:
    node_id: str
    experiment_id: str
    control_device_id: str
    cloud_token: str
    channels: dict[str, Channel] = field(default_factory=dict)
    occupancy: str = "vacant"  # vacant | occupied
    probing: bool = False
    marked_offline: bool = False
    last_ack_latency_ms: float | None = None
    last_error: dict | None = None

    @property
    def control_connected(self) -> bool:
        return self.control_device_id in self.channels


@dataclass
class SessionRecord:
    session_id: str
    user_id: str
    experiment_id: str
    node_id: str
    user_peer_id: str
    started_at_ms: float
    expires_at_ms: float
    started_at_iso: str = ""
    expires_at_iso: str = ""


@dataclass
class SlotReservation:
    reservation_id: str
    user_id: str
    experiment_id: str
    start_ms: float
    end_ms: float
    status: str = "booked"  # booked | cancelled


class EntryTicket:
    """Resolution of one enter request: granted, queued, or offline."""

    def __init__(self, user_id: str, experiment_id: str, peer_id: str):
        self.user_id = user_id
        self.experiment_id = experiment_id
        self.peer_id = peer_id
        self.state = "pending"
        self.node_id: str | None = None
        self.session_id: str | None = None
        self.queue_position: int | None = None
        self.resolved = threading.Event()

    def _resolve(self, state: str, **fields) -> None:
        self.state = state
        for key, value in fields.items():
            setattr(self, key, value)
        self.resolved.set()

    def as_dict(self) -> dict:
        out = {"state": self.state}
        if self.state == "granted":
            out.update(node_id=self.node_id, session_id=self.session_id)
        elif self.state == "queued":
            out.update(token=self.queue_position)
        return out


@dataclass
class _QueueEntry:
    user_id: str
    peer_id: str
    arrival: int
    ticket: EntryTicket
    joined_ms: float
    probing: bool = False
    tried_nodes: set[str] = field(default_factory=set)


@dataclass
class _Experiment:
    experiment_id: str
    kind: str  # FL | VR
    nodes: list[NodeRecord] = field(default_factory=list)
    queue: list[_QueueEntry] = field(default_factory=list)
    next_arrival: itertools.count = field(default_factory=lambda: itertools.count(1))


@dataclass
class _Probe:
    session_id: str
    experiment: _Experiment
    entry: _QueueEntry
    node: NodeRecord
    sent_ms: float
    timer: TimerHandle


class Orchestrator:
    def __init__(
        self,
        scheduler: Scheduler,
        cloud: PinCloud,
        session_duration_s: float = 300.0,
        trace: Trace | None = None,
        data_dir: str | Path | None = None,
    ):
        self._scheduler = scheduler
        self._cloud = cloud
        self._lock = threading.RLock()
        self.session_duration_s = session_duration_s
        self.trace = trace or Trace()
        self._experiments: dict[str, _Experiment] = {}
        self._devices: dict[str, DeviceDirectoryEntry] = {}
        self._users: dict[str, dict] = {}
        self._tokens: dict[str, str] = {}
        self._sessions: dict[str, SessionRecord] = {}
        self._probes: dict[str, _Probe] = {}
        self._reservations: dict[str, list[SlotReservation]] = {}
        self._session_seq = itertools.count(1)
        self._reservation_seq = itertools.count(1)
        self._data_dir = Path(data_dir) if data_dir else None
        if self._data_dir:
            self._data_dir.mkdir(parents=True, exist_ok=True)
            self._load_users()

    # -- static configuration --------------------------------------------------

    def add_experiment(self, experiment_id: str, kind: str) -> None:
        with self._lock:
            if experiment_id in self._experiments:
                raise ValidationError(f"duplicate experiment {experiment_id}")
            self._experiments[experiment_id] = _Experiment(experiment_id, kind)
            self._reservations.setdefault(experiment_id, [])

    def add_node(
        self,
        experiment_id: str,
        node_id: str,
        control_device_id: str,
        cloud_token: str,
        devices: list[DeviceDirectoryEntry],
    ) -> None:
        with self._lock:
            exp = self._experiments[experiment_id]
            if any(n.node_id == node_id for n in exp.nodes):
                raise ValidationError(f"duplicate node {node_id}")
            exp.nodes.append(
                NodeRecord(
                    node_id=node_id,
                    experiment_id=experiment_id,
                    control_device_id=control_device_id,
                    cloud_token=cloud_token,
                )
            )
            exp.nodes.sort(key=lambda n: n.node_id)
            for device in devices:
                self._devices[device.device_id] = device

    # -- accounts ---------------------------------------------------------------

    @staticmethod
    def _hash_secret(secret: str, salt: str) -> str:
        return hashlib.sha256((salt + secret).encode("utf-8")).hexdigest()

    def add_user(self, username: str, secret: str) -> None:
        with self._lock:
            salt = secrets.token_hex(8)
            self._users[username] = {"salt": salt, "hash": self._hash_secret(secret, salt)}
            self._save_users()

    def login(self, username: str, secret: str) -> str:
        with self._lock:
            record = self._users.get(username)
            if record is None or self._hash_secret(secret, record["salt"]) != record["hash"]:
                raise AuthError("bad credentials")
            token = secrets.token_hex(16)
            self._tokens[token] = username
            return token

    def logout(self, token: str) -> None:
        with self._lock:
            self._tokens.pop(token, None)

    def _auth(self, token: str) -> str:
        user = self._tokens.get(token)
        if user is None:
            raise AuthError("invalid or revoked token")
        return user

    def _load_users(self) -> None:
        path = self._data_dir / "users.json"
        if path.exists():
            self._users.update(json.loads(path.read_text()))

    def _save_users(self) -> None:
        if self._data_dir:
            (self._data_dir / "users.json").write_text(json.dumps(self._users, indent=2))

    def _append_record(self, filename: str, record: dict) -> None:
        if self._data_dir:
            with (self._data_dir / filename).open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record) + "\n")

    # -- device channel ------------------------------------------------------------

    def accept_device_channel(self, channel: Channel) -> None:
        """Bind a fresh device channel; the first message must be AUTH."""
        state = {"device_id": None}

        def handle(message: dict) -> None:
            mtype = message.get("type")
            if mtype == MSG_AUTH:
                self._handle_device_auth(channel, message, state)
            elif mtype == MSG_ACK:
                self._handle_ack(message)
            elif mtype == MSG_SESSION_END:
                self._handle_device_session_end(message)
            elif mtype == MSG_ERROR:
                self._handle_device_error(message)

        def closed() -> None:
            device_id = state["device_id"]
            if device_id is None:
                return
            with self._lock:
                entry = self._devices.get(device_id)
                if entry is None:
                    return
                node = self._find_node(entry.experiment_id, entry.node_id)
                if node is not None and node.channels.get(device_id) is channel:
                    del node.channels[device_id]

        channel.on_message(handle)
        channel.on_close(closed)

    def _handle_device_auth(self, channel: Channel, message: dict, state: dict) -> None:
        device_id = message.get("device_id", "")
        entry = self._devices.get(device_id)
        if (
            entry is None
            or message.get("credentials") != entry.credentials
            or message.get("experiment_id") != entry.experiment_id
        ):
            channel.send({"type": MSG_AUTH_FAIL, "reason": "bad credentials"})
            self.trace.emit("auth_fail", device_id=device_id)
            return
        with self._lock:
            node = self._find_node(entry.experiment_id, entry.node_id)
            node.channels[device_id] = channel
            node.marked_offline = False
            state["device_id"] = device_id
        channel.send({"type": MSG_AUTH_OK, "device_id": device_id})
        self.trace.emit("auth_ok", device_id=device_id, node_id=entry.node_id)
        self.trace.emit(
            "room_join",
            device_id=device_id,
            node_id=entry.node_id,
            experiment_id=entry.experiment_id,
        )
        with self._lock:
            self._dispatch(self._experiments[entry.experiment_id])

    def _find_node(self, experiment_id: str, node_id: str) -> NodeRecord | None:
        exp = self._experiments.get(experiment_id)
        if exp is None:
            return None
        for node in exp.nodes:
            if node.node_id == node_id:
                return node
        return None

    def _room_send(self, node: NodeRecord, message: dict) -> None:
        for channel in list(node.channels.values()):
            try:
                channel.send(message)
            except Exception:
                continue

    # -- triple-fold availability -----------------------------------------------------

    def _flag_is_vacant(self, node: NodeRecord) -> bool:
        try:
            flag = self._cloud.get_pin(node.cloud_token, PIN_FLAG)
        except CloudError:
            return False
        return flag is None or str(flag) == FLAG_VACANT

    def check_availability(self, experiment_id: str, node_id: str) -> tuple[bool, str]:
        """Fast legs of the triple check: cloud presence then occupancy flag.

        The stream leg is exercised by the live probe during entry; outside a
        probe we report the node's standing from its last probe outcome.
        """
        node = self._find_node(experiment_id, node_id)
        if node is None:
            raise NotFoundError(f"no node {node_id}")
        if not self._cloud.is_connected(node.cloud_token):
            return False, "cloud"
        if node.occupancy == "occupied" or not self._flag_is_vacant(node):
            return False, "occupied"
        if not node.control_connected or node.marked_offline:
            return False, "stream"
        return True, ""

    def _node_eligible(self, node: NodeRecord, entry: _QueueEntry) -> bool:
        if node.probing or node.occupancy == "occupied":
            return False
        if node.node_id in entry.tried_nodes:
            return False
        if not self._cloud.is_connected(node.cloud_token):
            return False
        if not self._flag_is_vacant(node):
            return False
        return node.control_connected

    # -- entry, queue, dispatch ----------------------------------------------------------

    def enter_experiment(self, token: str, experiment_id: str, peer_id: str) -> EntryTicket:
        user = self._auth(token)
        if not peer_id:
            raise ValidationError("peer_id required")
        with self._lock:
            exp = self._experiments.get(experiment_id)
            if exp is None:
                raise NotFoundError(f"no experiment {experiment_id}")
            for session in self._sessions.values():
                if session.user_id == user:
                    raise ConflictError(f"user already in session {session.session_id}")
            for waiting in exp.queue:
                if waiting.user_id == user:
                    # idempotent re-entry keeps the same position
                    ticket = waiting.ticket
                    if ticket.state == "pending" and not waiting.probing:
                        ticket._resolve("queued", queue_position=self._position(exp, waiting))
                    return ticket

            ticket = EntryTicket(user, experiment_id, peer_id)
            entry = _QueueEntry(
                user_id=user,
                peer_id=peer_id,
                arrival=next(exp.next_arrival),
                ticket=ticket,
                joined_ms=self._scheduler.now_ms(),
            )
            exp.queue.append(entry)
            self.trace.emit(
                "queue_join", user_id=user, experiment_id=experiment_id, arrival=entry.arrival
            )
            self._scheduler.call_later(
                QUEUE_IDLE_EXPIRY_MS, lambda: self._expire_queue_entry(exp, entry)
            )
            self._dispatch(exp)
            if ticket.state == "pending" and not entry.probing:
                self._settle_waiting(exp, entry)
            return ticket

    def _expire_queue_entry(self, exp: _Experiment, entry: _QueueEntry) -> None:
        """Waiting entries lapse after the idle window so ghosts never clog the queue."""
        with self._lock:
            if entry not in exp.queue or entry.probing:
                return
            exp.queue.remove(entry)
            self.trace.emit(
                "queue_leave", user_id=entry.user_id, experiment_id=exp.experiment_id,
                reason="expired",
            )
            if entry.ticket.state == "pending":
                entry.ticket._resolve("expired")
            else:
                entry.ticket.state = "expired"
            self._dispatch(exp)

    def _position(self, exp: _Experiment, entry: _QueueEntry) -> int:
        return exp.queue.index(entry) + 1

    def _settle_waiting(self, exp: _Experiment, entry: _QueueEntry) -> None:
        """Resolve a non-probing waiter to queued, or offline when hopeless."""
        if entry.ticket.state != "pending" or entry.probing:
            return
        any_occupied = any(n.occupancy == "occupied" for n in exp.nodes)
        any_candidate = any(self._node_eligible(n, entry) for n in exp.nodes)
        if not exp.nodes or (not any_occupied and not any_candidate):
            exp.queue.remove(entry)
            self.trace.emit(
                "queue_leave", user_id=entry.user_id, experiment_id=exp.experiment_id,
                reason="offline",
            )
            entry.ticket._resolve("offline")
        else:
            entry.ticket._resolve("queued", queue_position=self._position(exp, entry))

    def _reservation_priority(self, exp: _Experiment, entry: _QueueEntry) -> bool:
        now = self._scheduler.now_ms()
        return any(
            r.status == "booked" and r.user_id == entry.user_id and r.start_ms <= now < r.end_ms
            for r in self._reservations.get(exp.experiment_id, ())
        )

    def _user_has_session(self, user_id: str) -> bool:
        return any(s.user_id == user_id for s in self._sessions.values())

    def _next_waiting(self, exp: _Experiment) -> _QueueEntry | None:
        waiting = [
            e
            for e in exp.queue
            if not e.probing
            and e.ticket.state in ("pending", "queued")
            # a user holding a session elsewhere keeps their place but is
            # not grantable until that session ends
            and not self._user_has_session(e.user_id)
        ]
        if not waiting:
            return None
        # reservation holders take precedence inside their booked interval
        holders = [e for e in waiting if self._reservation_priority(exp, e)]
        return (holders or waiting)[0]

    def _dispatch(self, exp: _Experiment) -> None:
        """Grant free nodes to waiting users, FIFO, one probe per node."""
        while True:
            entry = self._next_waiting(exp)
            if entry is None:
                return
            node = next((n for n in exp.nodes if self._node_eligible(n, entry)), None)
            if node is None:
                return
            self._begin_probe(exp, entry, node)

    def _begin_probe(self, exp: _Experiment, entry: _QueueEntry, node: NodeRecord) -> None:
        session_id = f"sess-{next(self._session_seq)}"
        node.probing = True
        entry.probing = True
        entry.tried_nodes.add(node.node_id)
        sent_ms = self._scheduler.now_ms()
        message = {
            "type": MSG_SESSION_START,
            "session_id": session_id,
            "user_peer_id": entry.peer_id,
            "node_id": node.node_id,
        }
        self.trace.emit(
            "session_start",
            session_id=session_id,
            node_id=node.node_id,
            user_id=entry.user_id,
            experiment_id=exp.experiment_id,
        )
        timer = self._scheduler.call_later(
            ACK_DEADLINE_MS, lambda: self._probe_timeout(session_id)
        )
        self._probes[session_id] = _Probe(session_id, exp, entry, node, sent_ms, timer)
        self._room_send(node, message)

    def _handle_ack(self, message: dict) -> None:
        with self._lock:
            session_id = message.get("session_id")
            probe = self._probes.get(session_id)
            if probe is None:
                return  # stale or duplicate ack
            if message.get("device_id") != probe.node.control_device_id:
                return  # stream-only acks don't vouch for the hardware
            del self._probes[session_id]
            probe.timer.cancel()
            now = self._scheduler.now_ms()
            node, entry, exp = probe.node, probe.entry, probe.experiment
            node.probing = False
            node.last_ack_latency_ms = now - probe.sent_ms
            entry.probing = False
            if entry not in exp.queue or self._user_has_session(entry.user_id):
                # the user left (or got a node elsewhere) while the probe was
                # in flight: reset the agent instead of granting a ghost
                self.trace.emit(
                    "grant_aborted", session_id=session_id, user_id=entry.user_id,
                    node_id=node.node_id,
                )
                self._room_send(
                    node,
                    {"type": MSG_SESSION_END, "session_id": session_id, "reason": "user-left"},
                )
                self._dispatch(exp)
                return
            node.occupancy = "occupied"
            node.marked_offline = False
            exp.queue.remove(entry)
            self.trace.emit(
                "queue_leave", user_id=entry.user_id, experiment_id=exp.experiment_id,
                reason="granted",
            )
            try:
                self._cloud.update_pin(node.cloud_token, PIN_FLAG, FLAG_OCCUPIED)
            except CloudError:
                pass
            self.trace.emit("flag_occupied", node_id=node.node_id)
            duration_ms = self.session_duration_s * 1000.0
            session = SessionRecord(
                session_id=session_id,
                user_id=entry.user_id,
                experiment_id=exp.experiment_id,
                node_id=node.node_id,
                user_peer_id=entry.peer_id,
                started_at_ms=now,
                expires_at_ms=now + duration_ms,
                started_at_iso=self._scheduler.utc_at(now).isoformat(),
                expires_at_iso=self._scheduler.utc_at(now + duration_ms).isoformat(),
            )
            self._sessions[session_id] = session
            self._scheduler.call_later(
                duration_ms + SESSION_GRACE_MS,
                lambda: self._expire_session(session_id),
            )
            self.trace.emit(
                "grant",
                session_id=session_id,
                user_id=entry.user_id,
                node_id=node.node_id,
                experiment_id=exp.experiment_id,
            )
            entry.ticket._resolve("granted", node_id=node.node_id, session_id=session_id)
            self._dispatch(exp)

    def _probe_timeout(self, session_id: str) -> None:
        with self._lock:
            probe = self._probes.pop(session_id, None)
            if probe is None:
                return
            node, entry, exp = probe.node, probe.entry, probe.experiment
            node.probing = False
            node.marked_offline = True
            entry.probing = False
            self.trace.emit(
                "node_unavailable", node_id=node.node_id, reason="stream", session_id=session_id
            )
            # defensively reset an agent that acked late or half-started
            self._room_send(
                node,
                {"type": MSG_SESSION_END, "session_id": session_id, "reason": "probe-timeout"},
            )
            self._dispatch(exp)
            self._settle_waiting(exp, entry)

    def _expire_session(self, session_id: str) -> None:
        with self._lock:
            if session_id in self._sessions:
                self._close_session(session_id, "timeout", notify_device=True)

    # -- session lifecycle -----------------------------------------------------------------

    def _close_session(self, session_id: str, reason: str, notify_device: bool) -> None:
        session = self._sessions.pop(session_id, None)
        if session is None:
            return
        exp = self._experiments[session.experiment_id]
        node = self._find_node(session.experiment_id, session.node_id)
        if node is not None:
            node.occupancy = "vacant"
            try:
                self._cloud.update_pin(node.cloud_token, PIN_FLAG, FLAG_VACANT)
            except CloudError:
                pass
            self.trace.emit("flag_vacant", node_id=node.node_id)
            if notify_device:
                self._room_send(
                    node,
                    {"type": MSG_SESSION_END, "session_id": session_id, "reason": reason},
                )
        self.trace.emit(
            "session_end",
            session_id=session_id,
            user_id=session.user_id,
            node_id=session.node_id,
            reason=reason,
        )
        self._append_record(
            "sessions.ndjson",
            {
                "session_id": session_id,
                "user_id": session.user_id,
                "experiment_id": session.experiment_id,
                "node_id": session.node_id,
                "started_at": session.started_at_iso,
                "ended_at": self._scheduler.iso_now(),
                "reason": reason,
            },
        )
        self._dispatch(exp)
        # the freed user may be waiting elsewhere and just became grantable
        for other in self._experiments.values():
            if other is not exp and any(e.user_id == session.user_id for e in other.queue):
                self._dispatch(other)

    def _handle_device_session_end(self, message: dict) -> None:
        with self._lock:
            self._close_session(
                message.get("session_id", ""),
                message.get("reason", "device-end"),
                notify_device=False,
            )

    def _handle_device_error(self, message: dict) -> None:
        with self._lock:
            entry = self._devices.get(message.get("device_id", ""))
            if entry is not None:
                node = self._find_node(entry.experiment_id, entry.node_id)
                if node is not None:
                    node.last_error = {
                        "code": message.get("code"),
                        "detail": message.get("detail"),
                    }
            self.trace.emit(
                "device_error",
                device_id=message.get("device_id"),
                code=message.get("code"),
                detail=message.get("detail"),
            )

    # -- user API ------------------------------------------------------------------------------

    def user_session(self, token: str) -> SessionRecord | None:
        user = self._auth(token)
        with self._lock:
            for session in self._sessions.values():
                if session.user_id == user:
                    return session
            return None

    def submit_input(self, token: str, experiment_id: str, params: dict) -> dict:
        user = self._auth(token)
        with self._lock:
            session = next(
                (
                    s
                    for s in self._sessions.values()
                    if s.user_id == user and s.experiment_id == experiment_id
                ),
                None,
            )
            if session is None:
                raise PermissionError_("no active session for this experiment")
            exp = self._experiments[experiment_id]
            self._validate_params(exp.kind, params)
            node = self._find_node(experiment_id, session.node_id)
            a, b = (
                (params["target"], params["steps"])
                if exp.kind == "FL"
                else (params["direction"], params["steps"])
            )
            try:
                self._cloud.update_pin(node.cloud_token, PIN_INPUT_A, a)
                self._cloud.update_pin(node.cloud_token, PIN_INPUT_B, b)
            except CloudError:
                pass
            self._room_send(
                node,
                {"type": MSG_COMMAND, "session_id": session.session_id, "params": params},
            )
            self.trace.emit(
                "input", session_id=session.session_id, user_id=user, params=params
            )
            return {"accepted": True, "session_id": session.session_id}

    @staticmethod
    def _validate_params(kind: str, params: dict) -> None:
        if not isinstance(params, dict):
            raise ValidationError("params must be an object")
        steps = params.get("steps")
        if not isinstance(steps, int) or isinstance(steps, bool):
            raise ValidationError(f"steps must be an integer, got {steps!r}")
        if kind == "FL":
            if params.get("target") not in ("object", "screen"):
                raise ValidationError("target must be 'object' or 'screen'")
        else:
            if params.get("direction") not in ("up", "down"):
                raise ValidationError("direction must be 'up' or 'down'")
            if steps < 0:
                raise ValidationError("steps must be unsigned for rod moves")

    def leave_experiment(self, token: str, experiment_id: str) -> dict:
        user = self._auth(token)
        with self._lock:
            exp = self._experiments.get(experiment_id)
            if exp is None:
                raise NotFoundError(f"no experiment {experiment_id}")
            session = next(
                (
                    s
                    for s in self._sessions.values()
                    if s.user_id == user and s.experiment_id == experiment_id
                ),
                None,
            )
            if session is not None:
                self._close_session(session.session_id, "user-left", notify_device=True)
                return {"left": "session"}
            for entry in exp.queue:
                if entry.user_id == user:
                    exp.queue.remove(entry)
                    self.trace.emit(
                        "queue_leave", user_id=user, experiment_id=experiment_id, reason="left"
                    )
                    if entry.ticket.state == "pending":
                        entry.ticket._resolve("left")
                    self._dispatch(exp)
                    return {"left": "queue"}
            return {"left": "nothing"}

    def queue_status(self, token: str, experiment_id: str) -> dict:
        user = self._auth(token)
        with self._lock:
            exp = self._experiments.get(experiment_id)
            if exp is None:
                raise NotFoundError(f"no experiment {experiment_id}")
            for session in self._sessions.values():
                if session.user_id == user and session.experiment_id == experiment_id:
                    return {
                        "status": "granted",
                        "session_id": session.session_id,
                        "node_id": session.node_id,
                        "expires_at": session.expires_at_iso,
                    }
            for index, entry in enumerate(exp.queue):
                if entry.user_id == user:
                    return {"status": "queued", "token": index + 1}
            return {"status": "idle"}

    def get_output(self, token: str, experiment_id: str) -> dict:
        user = self._auth(token)
        with self._lock:
            session = next(
                (
                    s
                    for s in self._sessions.values()
                    if s.user_id == user and s.experiment_id == experiment_id
                ),
                None,
            )
            if session is None:
                raise PermissionError_("no active session for this experiment")
            node = self._find_node(experiment_id, session.node_id)
            try:
                return {"node_id": node.node_id, "pins": self._cloud.pins(node.cloud_token)}
            except CloudError:
                return {"node_id": node.node_id, "pins": {}}

    def list_experiments(self, token: str) -> list[dict]:
        self._auth(token)
        with self._lock:
            catalog = []
            for exp in self._experiments.values():
                available = 0
                for node in exp.nodes:
                    ok, _ = self.check_availability(exp.experiment_id, node.node_id)
                    if ok:
                        available += 1
                catalog.append(
                    {
                        "id": exp.experiment_id,
                        "kind": exp.kind,
                        "nodes": len(exp.nodes),
                        "available": available,
                        "queue_length": len(exp.queue),
                    }
                )
            return catalog

    # -- slot booking -----------------------------------------------------------------------------

    def book_slot(self, token: str, experiment_id: str, start_ms: float, end_ms: float) -> dict:
        user = self._auth(token)
        with self._lock:
            exp = self._experiments.get(experiment_id)
            if exp is None:
                raise NotFoundError(f"no experiment {experiment_id}")
            if start_ms % SLOT_GRANULARITY_MS or end_ms % SLOT_GRANULARITY_MS:
                raise ValidationError("interval must align to 30-minute slots")
            if end_ms <= start_ms:
                raise ValidationError("end must be after start")
            if start_ms < self._scheduler.now_ms():
                raise ValidationError("interval must be in the future")
            pool = len(exp.nodes)
            if self._overlap_count(experiment_id, start_ms, end_ms) >= pool:
                hint = self._next_free_slot(experiment_id, start_ms, end_ms - start_ms, pool)
                raise ConflictError(
                    "capacity exceeded for that interval",
                    next_free_iso=self._scheduler.utc_at(hint).isoformat() if hint else None,
                )
            reservation = SlotReservation(
                reservation_id=f"res-{next(self._reservation_seq)}",
                user_id=user,
                experiment_id=experiment_id,
                start_ms=start_ms,
                end_ms=end_ms,
            )
            self._reservations[experiment_id].append(reservation)
            self._append_record(
                "reservations.ndjson",
                {
                    "reservation_id": reservation.reservation_id,
                    "user_id": user,
                    "experiment_id": experiment_id,
                    "start": self._scheduler.utc_at(start_ms).isoformat(),
                    "end": self._scheduler.utc_at(end_ms).isoformat(),
                },
            )
            return {
                "reservation_id": reservation.reservation_id,
                "start": self._scheduler.utc_at(start_ms).isoformat(),
                "end": self._scheduler.utc_at(end_ms).isoformat(),
            }

    def _overlap_count(self, experiment_id: str, start_ms: float, end_ms: float) -> int:
        return sum(
            1
            for r in self._reservations.get(experiment_id, ())
            if r.status == "booked" and r.start_ms < end_ms and start_ms < r.end_ms
        )

    def _next_free_slot(
        self, experiment_id: str, from_ms: float, duration_ms: float, pool: int
    ) -> float | None:
        slot = from_ms
        for _ in range(48 * 7):  # scan a week of slots
            if self._overlap_count(experiment_id, slot, slot + duration_ms) < pool:
                return slot
            slot += SLOT_GRANULARITY_MS
        return None

    # -- introspection ----------------------------------------------------------------------------

    def active_sessions(self) -> list[SessionRecord]:
        with self._lock:
            return list(self._sessions.values())

    def queue_snapshot(self, experiment_id: str) -> list[str]:
        with self._lock:
            return [e.user_id for e in self._experiments[experiment_id].queue]

    def node_record(self, experiment_id: str, node_id: str) -> NodeRecord:
        node = self._find_node(experiment_id, node_id)
        if node is None:
            raise NotFoundError(f"no node {node_id}")
        return node
