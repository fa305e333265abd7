"""Network surfaces: WebSocket framing and the three HTTP services."""

from .http import (
    CloudServer,
    OrchestratorServer,
    SignalingServer,
    WsChannel,
    start_servers,
)
from .ws import WebSocketConnection, WebSocketError, accept_key, connect

__all__ = [
    "CloudServer",
    "OrchestratorServer",
    "SignalingServer",
    "WebSocketConnection",
    "WebSocketError",
    "WsChannel",
    "accept_key",
    "connect",
    "start_servers",
]
