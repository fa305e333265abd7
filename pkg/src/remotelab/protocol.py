"""Typed envelopes and transports for the device-to-server channel.

Messages are plain dicts with a `type` field. The in-process LocalChannel
delivers through the scheduler so ordering is deterministic in virtual time;
the live stack substitutes a WebSocket-backed channel with the same surface.
"""

from __future__ import annotations

from typing import Callable

from .clock import Scheduler

MSG_AUTH = "AUTH"
MSG_AUTH_OK = "AUTH_OK"
MSG_AUTH_FAIL = "AUTH_FAIL"
MSG_SESSION_START = "SESSION_START"
MSG_ACK = "ACK"
MSG_SESSION_END = "SESSION_END"
MSG_COMMAND = "COMMAND"
MSG_ERROR = "ERROR"

MESSAGE_TYPES = frozenset(
    {
        MSG_AUTH,
        MSG_AUTH_OK,
        MSG_AUTH_FAIL,
        MSG_SESSION_START,
        MSG_ACK,
        MSG_SESSION_END,
        MSG_COMMAND,
        MSG_ERROR,
    }
)


class ProtocolError(Exception):
    pass


def validate_message(message: dict) -> dict:
    if not isinstance(message, dict):
        raise ProtocolError(f"message must be a dict, got {type(message).__name__}")
    mtype = message.get("type")
    if mtype not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {mtype!r}")
    return message


class Channel:
    """One endpoint of a bidirectional message channel."""

    def send(self, message: dict) -> None:
        raise NotImplementedError

    def on_message(self, handler: Callable[[dict], None]) -> None:
        raise NotImplementedError

    def on_close(self, handler: Callable[[], None]) -> None:
        raise NotImplementedError

    def close(self) -> None:
        raise NotImplementedError


class LocalChannel(Channel):
    """In-process channel endpoint; see `pair`."""

    def __init__(self, scheduler: Scheduler, delay_ms: float = 0.0):
        self._scheduler = scheduler
        self._delay_ms = delay_ms
        self._peer: LocalChannel | None = None
        self._handler: Callable[[dict], None] | None = None
        self._close_handler: Callable[[], None] | None = None
        self._backlog: list[dict] = []
        self.closed = False

    @staticmethod
    def pair(scheduler: Scheduler, delay_ms: float = 0.0) -> tuple["LocalChannel", "LocalChannel"]:
        a = LocalChannel(scheduler, delay_ms)
        b = LocalChannel(scheduler, delay_ms)
        a._peer = b
        b._peer = a
        return a, b

    def send(self, message: dict) -> None:
        validate_message(message)
        if self.closed or self._peer is None:
            raise ProtocolError("channel is closed")
        peer = self._peer

        def deliver():
            if peer.closed:
                return
            if peer._handler is None:
                peer._backlog.append(message)
            else:
                peer._handler(message)

        self._scheduler.call_later(self._delay_ms, deliver)

    def on_message(self, handler: Callable[[dict], None]) -> None:
        self._handler = handler
        while self._backlog:
            handler(self._backlog.pop(0))

    def on_close(self, handler: Callable[[], None]) -> None:
        self._close_handler = handler

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        if self._close_handler is not None:
            self._close_handler()
        peer = self._peer
        if peer is not None and not peer.closed:
            peer.close()
