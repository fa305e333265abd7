"""Interoperability pin cloud: token-scoped virtual pins plus device presence.

Devices and the orchestrator exchange scalar values through named pins
(V0, V1, ...) keyed by device token. Writes go through an append-only journal
so a restarted cloud recovers its pin state.
"""

from __future__ import annotations

import json
import re
import threading
from pathlib import Path

from .clock import Scheduler

PIN_PATTERN = re.compile(r"V\d+")

HEARTBEAT_TTL_MS = 10_000.0
HEARTBEAT_PERIOD_MS = 3_000.0

FLAG_VACANT = "0"
FLAG_OCCUPIED = "1"


class CloudError(Exception):
    pass


class UnknownTokenError(CloudError):
    """Token not registered with the cloud (401-equivalent)."""


class BadPinError(CloudError):
    """Pin name outside the V[0-9]+ namespace (400-equivalent)."""


def coerce_value(raw: str):
    """Pins store strings; reads coerce numerics like the REST surface does."""
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


class PinCloud:
    """In-memory pin store with journal recovery. Thread-safe."""

    def __init__(
        self,
        scheduler: Scheduler,
        tokens: tuple[str, ...] | list[str] = (),
        heartbeat_ttl_ms: float = HEARTBEAT_TTL_MS,
        journal_path: str | Path | None = None,
    ):
        self._scheduler = scheduler
        self._lock = threading.RLock()
        self._tokens: set[str] = set(tokens)
        self._entries: dict[tuple[str, str], tuple[str, float]] = {}
        self._presence: dict[str, float] = {}
        self._ttl_ms = heartbeat_ttl_ms
        self._journal_path = Path(journal_path) if journal_path else None
        self._journal_file = None
        if self._journal_path is not None:
            self._recover()
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal_file = self._journal_path.open("a", encoding="utf-8")

    def _recover(self) -> None:
        if not self._journal_path.exists():
            return
        with self._journal_path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                key = (record["token"], record["pin"])
                self._entries[key] = (str(record["value"]), float(record["ts"]))
                self._tokens.add(record["token"])

    def register_token(self, token: str) -> None:
        with self._lock:
            self._tokens.add(token)

    def _check_token(self, token: str) -> None:
        if token not in self._tokens:
            raise UnknownTokenError(f"unknown device token {token!r}")

    def update_pin(self, token: str, pin: str, value) -> None:
        if not PIN_PATTERN.fullmatch(pin or ""):
            raise BadPinError(f"malformed pin name {pin!r}")
        raw = str(value)
        with self._lock:
            self._check_token(token)
            ts = self._scheduler.now_ms()
            self._entries[(token, pin)] = (raw, ts)
            if self._journal_file is not None:
                self._journal_file.write(
                    json.dumps({"ts": ts, "token": token, "pin": pin, "value": raw}) + "\n"
                )
                self._journal_file.flush()

    def get_pin(self, token: str, pin: str):
        if not PIN_PATTERN.fullmatch(pin or ""):
            raise BadPinError(f"malformed pin name {pin!r}")
        with self._lock:
            self._check_token(token)
            entry = self._entries.get((token, pin))
            if entry is None:
                return None
            return coerce_value(entry[0])

    def last_write_ms(self, token: str, pin: str) -> float | None:
        with self._lock:
            entry = self._entries.get((token, pin))
            return None if entry is None else entry[1]

    def pins(self, token: str) -> dict[str, object]:
        """All written pins for a token, coerced."""
        with self._lock:
            self._check_token(token)
            return {
                pin: coerce_value(raw)
                for (tok, pin), (raw, _) in sorted(self._entries.items())
                if tok == token
            }

    def heartbeat(self, token: str) -> None:
        with self._lock:
            self._check_token(token)
            self._presence[token] = self._scheduler.now_ms()

    def is_connected(self, token: str) -> bool:
        """True iff a heartbeat arrived within the TTL; unknown tokens are False."""
        with self._lock:
            last = self._presence.get(token)
            if last is None:
                return False
            return self._scheduler.now_ms() - last <= self._ttl_ms

    def close(self) -> None:
        with self._lock:
            if self._journal_file is not None:
                self._journal_file.close()
                self._journal_file = None
