"""Peer registry, call brokerage, and simulated media transport.

Peers register under unique ids; a device "calls" a user peer and then
publishes frames into the session. Delivery is in-process message passing with
a configurable one-way latency per camera profile, preserving per-session
frame order. In-flight frames are discarded at teardown.
"""

from __future__ import annotations

import itertools
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from .clock import Scheduler, TimerHandle

# One-way stream latencies measured per camera rig, in milliseconds.
CAMERA_PROFILES_MS = {
    "pi3b": 350.0,
    "pizero2w": 860.0,
    "ipcam": 2010.0,
}


class SignalingError(Exception):
    pass


class DuplicatePeerError(SignalingError):
    pass


class NoSuchPeerError(SignalingError):
    pass


class StaleSessionError(SignalingError):
    pass


@dataclass
class Delivery:
    """Receipt for one published frame."""

    seq: int
    sent_ms: float
    due_ms: float
    delivered_ms: float | None = None

    @property
    def delivered(self) -> bool:
        return self.delivered_ms is not None


@dataclass
class PeerRecord:
    peer_id: str
    registered_at: float
    inbox: deque = field(default_factory=deque)
    push: Callable | None = None  # live delivery hook (stream channel)


@dataclass
class MediaSession:
    session_id: str
    caller_peer: str
    callee_peer: str
    latency_ms: float
    camera_profile: str = ""
    state: str = "offered"  # offered -> active -> ended
    end_reason: str = ""
    frames_sent: int = 0
    frames_delivered: int = 0
    deliveries: list[Delivery] = field(default_factory=list)
    pending: dict[int, TimerHandle] = field(default_factory=dict)


class SignalingBroker:
    """Thread-safe broker for register/call/publish/hangup."""

    def __init__(
        self,
        scheduler: Scheduler,
        camera_profiles: dict[str, float] | None = None,
        trace=None,
    ):
        self._scheduler = scheduler
        self._lock = threading.RLock()
        self._peers: dict[str, PeerRecord] = {}
        self._sessions: dict[str, MediaSession] = {}
        self._session_seq = itertools.count(1)
        self._frame_seq = itertools.count(1)
        self.camera_profiles = dict(CAMERA_PROFILES_MS if camera_profiles is None else camera_profiles)
        self._trace = trace

    # -- registry ------------------------------------------------------------

    def register(self, peer_id: str) -> PeerRecord:
        if not peer_id:
            raise SignalingError("peer_id must be non-empty")
        with self._lock:
            if peer_id in self._peers:
                raise DuplicatePeerError(f"peer {peer_id!r} already registered")
            record = PeerRecord(peer_id=peer_id, registered_at=self._scheduler.now_ms())
            self._peers[peer_id] = record
            return record

    def unregister(self, peer_id: str) -> None:
        with self._lock:
            self._peers.pop(peer_id, None)
            for session in list(self._sessions.values()):
                if session.state != "ended" and peer_id in (
                    session.caller_peer,
                    session.callee_peer,
                ):
                    self._end(session, "peer-unregistered")

    def is_registered(self, peer_id: str) -> bool:
        with self._lock:
            return peer_id in self._peers

    def peer(self, peer_id: str) -> PeerRecord:
        with self._lock:
            record = self._peers.get(peer_id)
            if record is None:
                raise NoSuchPeerError(f"no peer {peer_id!r}")
            return record

    def attach_push(self, peer_id: str, push: Callable | None) -> list:
        """Install a live delivery hook; returns (and clears) queued frames.

        While a hook is attached, deliveries go to it instead of the inbox, so
        the drain-then-push sequence neither drops nor duplicates frames.
        """
        with self._lock:
            record = self.peer(peer_id)
            record.push = push
            drained = list(record.inbox)
            record.inbox.clear()
            return drained

    # -- sessions ------------------------------------------------------------

    def call(self, caller: str, callee: str, camera_profile: str = "") -> MediaSession:
        """Place a call; the callee auto-accepts, so the session comes back active."""
        with self._lock:
            if caller not in self._peers:
                raise NoSuchPeerError(f"caller {caller!r} not registered")
            if callee not in self._peers:
                raise NoSuchPeerError(f"callee {callee!r} not registered")
            latency = self.camera_profiles.get(camera_profile, 0.0)
            session = MediaSession(
                session_id=f"media-{next(self._session_seq)}",
                caller_peer=caller,
                callee_peer=callee,
                latency_ms=latency,
                camera_profile=camera_profile,
            )
            session.state = "active"
            self._sessions[session.session_id] = session
            if self._trace is not None:
                self._trace.emit(
                    "call",
                    caller=caller,
                    callee=callee,
                    media_session=session.session_id,
                    camera_profile=camera_profile,
                )
            return session

    def session(self, session_id: str) -> MediaSession:
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise StaleSessionError(f"no session {session_id!r}")
            return session

    def publish_frame(self, session_id: str, frame) -> Delivery:
        """Queue a frame for timed delivery to the callee. FIFO per session."""
        with self._lock:
            session = self.session(session_id)
            if session.state != "active":
                raise StaleSessionError(f"session {session_id} is {session.state}")
            now = self._scheduler.now_ms()
            seq = next(self._frame_seq)
            delivery = Delivery(seq=seq, sent_ms=now, due_ms=now + session.latency_ms)
            session.frames_sent += 1
            session.deliveries.append(delivery)

            def deliver(session=session, delivery=delivery, frame=frame, seq=seq):
                with self._lock:
                    session.pending.pop(seq, None)
                    if session.state != "active":
                        return  # dropped at teardown
                    callee = self._peers.get(session.callee_peer)
                    if callee is None:
                        return
                    delivery.delivered_ms = self._scheduler.now_ms()
                    session.frames_delivered += 1
                    push = callee.push
                    if push is None:
                        callee.inbox.append(
                            (delivery.delivered_ms, session.session_id, frame)
                        )
                if push is not None:
                    push(session.session_id, frame)

            session.pending[seq] = self._scheduler.call_later(session.latency_ms, deliver)
            return delivery

    def hangup(self, session_id: str, reason: str = "hangup") -> None:
        with self._lock:
            session = self.session(session_id)
            if session.state == "ended":
                return
            self._end(session, reason)

    def _end(self, session: MediaSession, reason: str) -> None:
        session.state = "ended"
        session.end_reason = reason
        for handle in session.pending.values():
            handle.cancel()
        session.pending.clear()

    def sessions_for_callee(self, peer_id: str) -> list[MediaSession]:
        with self._lock:
            return [s for s in self._sessions.values() if s.callee_peer == peer_id]
