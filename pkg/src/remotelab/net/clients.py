"""HTTP clients with the same surfaces as the in-process services.

Device agents are wired against these when they run in their own process:
the duck-typed interfaces match PinCloud and SignalingBroker, so the agent
code is identical either way.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass

from ..cloud import BadPinError, CloudError, UnknownTokenError, coerce_value
from ..physics import encode_pgm
from ..signaling import (
    DuplicatePeerError,
    NoSuchPeerError,
    SignalingError,
    StaleSessionError,
)


def _request(url: str, data: bytes | None = None, content_type: str = "application/json"):
    request = urllib.request.Request(url, data=data)
    if data is not None:
        request.add_header("Content-Type", content_type)
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", errors="replace")
        raise _HttpStatusError(exc.code, detail) from exc


class _HttpStatusError(Exception):
    def __init__(self, status: int, detail: str):
        super().__init__(f"HTTP {status}: {detail}")
        self.status = status
        self.detail = detail


class CloudHttpClient:
    """PinCloud surface over the cloud service's REST API."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def _get(self, path: str, **params):
        url = f"{self.base_url}{path}?{urllib.parse.urlencode(params)}"
        try:
            return _request(url)
        except _HttpStatusError as exc:
            if exc.status == 401:
                raise UnknownTokenError(exc.detail) from exc
            if exc.status == 400:
                raise BadPinError(exc.detail) from exc
            raise CloudError(exc.detail) from exc

    def update_pin(self, token: str, pin: str, value) -> None:
        self._get("/cloud/update", token=token, pin=pin, value=str(value))

    def get_pin(self, token: str, pin: str):
        value = self._get("/cloud/get", token=token, pin=pin)["value"]
        return coerce_value(str(value)) if value is not None else None

    def is_connected(self, token: str) -> bool:
        return bool(self._get("/cloud/connected", token=token)["connected"])

    def heartbeat(self, token: str) -> None:
        try:
            _request(
                f"{self.base_url}/cloud/heartbeat",
                data=json.dumps({"token": token}).encode("utf-8"),
            )
        except _HttpStatusError as exc:
            raise CloudError(exc.detail) from exc


@dataclass
class RemoteMediaSession:
    session_id: str
    latency_ms: float


class BrokerHttpClient:
    """SignalingBroker surface over the signaling service's API."""

    def __init__(self, base_url: str):
        self.base_url = base_url.rstrip("/")

    def _post(self, path: str, payload: dict):
        try:
            return _request(
                f"{self.base_url}{path}", data=json.dumps(payload).encode("utf-8")
            )
        except _HttpStatusError as exc:
            if exc.status == 409:
                raise DuplicatePeerError(exc.detail) from exc
            if exc.status == 404:
                raise NoSuchPeerError(exc.detail) from exc
            raise SignalingError(exc.detail) from exc

    def register(self, peer_id: str) -> None:
        self._post("/peer/register", {"peer_id": peer_id})

    def unregister(self, peer_id: str) -> None:
        self._post("/peer/unregister", {"peer_id": peer_id})

    def is_registered(self, peer_id: str) -> bool:
        params = urllib.parse.urlencode({"peer_id": peer_id})
        return bool(_request(f"{self.base_url}/peer/registered?{params}")["registered"])

    def call(self, caller: str, callee: str, camera_profile: str = "") -> RemoteMediaSession:
        reply = self._post(
            "/peer/call",
            {"caller": caller, "callee": callee, "camera_profile": camera_profile},
        )
        return RemoteMediaSession(reply["session_id"], reply["latency_ms"])

    def hangup(self, session_id: str, reason: str = "hangup") -> None:
        self._post("/peer/hangup", {"session_id": session_id, "reason": reason})

    def publish_frame(self, session_id: str, frame) -> dict:
        data = encode_pgm(
            frame,
            metadata={"camera": frame.camera_id, "seq": frame.seq, "ts": frame.timestamp_ms},
        )
        params = urllib.parse.urlencode({"session_id": session_id})
        url = f"{self.base_url}/peer/publish?{params}"
        try:
            return _request(url, data=data, content_type="image/x-portable-graymap")
        except _HttpStatusError as exc:
            if exc.status == 404:
                raise StaleSessionError(exc.detail) from exc
            raise SignalingError(exc.detail) from exc
