"""HTTP and WebSocket surfaces for the three services.

Each service binds its own address: the pin cloud, the signaling broker, and
the orchestrator API with the device channel. Handlers call straight into the
in-process platform objects, which guard their own state.
"""

from __future__ import annotations

import json
import threading
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from ..cloud import BadPinError, CloudError, UnknownTokenError
from ..orchestrator import ConflictError, OrchestratorError
from ..physics import encode_pgm
from ..platform import Platform
from ..protocol import Channel
from ..signaling import DuplicatePeerError, NoSuchPeerError, SignalingError, StaleSessionError
from .ws import OP_TEXT, WebSocketConnection, accept_key

ENTER_WAIT_S = 6.5  # probe deadline plus slack


class WsChannel(Channel):
    """Channel adapter over one WebSocket connection (either side)."""

    def __init__(self, ws: WebSocketConnection):
        self._ws = ws
        self._handler = None
        self._close_handler = None
        self._backlog: list[dict] = []
        self._lock = threading.Lock()
        self.closed = False

    def send(self, message: dict) -> None:
        self._ws.send_text(json.dumps(message))

    def on_message(self, handler) -> None:
        with self._lock:
            self._handler = handler
            backlog, self._backlog = self._backlog, []
        for message in backlog:
            handler(message)

    def on_close(self, handler) -> None:
        self._close_handler = handler

    def close(self) -> None:
        self._fire_close()
        self._ws.close()

    def _fire_close(self) -> None:
        if not self.closed:
            self.closed = True
            if self._close_handler is not None:
                self._close_handler()

    def pump(self) -> None:
        """Read messages until the socket closes; runs on the caller's thread."""
        while True:
            message = self._ws.recv_message()
            if message is None:
                break
            opcode, payload = message
            if opcode != OP_TEXT:
                continue
            try:
                decoded = json.loads(payload.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                continue
            with self._lock:
                handler = self._handler
                if handler is None:
                    self._backlog.append(decoded)
            if handler is not None:
                handler(decoded)
        self._fire_close()

    def pump_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.pump, daemon=True)
        thread.start()
        return thread


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "remotelab"

    # quiet the default stderr chatter
    def log_message(self, format, *args):  # noqa: A002
        pass

    @property
    def platform(self) -> Platform:
        return self.server.platform

    # -- plumbing --------------------------------------------------------------

    def _json_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length).decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            return {}

    def _reply(self, payload: dict, status: int = 200) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str, **extra) -> None:
        self._reply({"error": message, **extra}, status=status)

    def _bearer(self) -> str:
        header = self.headers.get("Authorization", "")
        return header.removeprefix("Bearer ").strip()

    def _upgrade_websocket(self) -> WebSocketConnection | None:
        if self.headers.get("Upgrade", "").lower() != "websocket":
            self._error(400, "websocket upgrade required")
            return None
        key = self.headers.get("Sec-WebSocket-Key", "")
        self.send_response(101, "Switching Protocols")
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", accept_key(key))
        self.end_headers()
        self.wfile.flush()
        self.close_connection = True
        return WebSocketConnection(self.connection, mask_outgoing=False)

    def _cors_preflight(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_OPTIONS(self):  # noqa: N802
        self._cors_preflight()

    def do_GET(self):  # noqa: N802
        self._route("GET")

    def do_POST(self):  # noqa: N802
        self._route("POST")

    def _route(self, method: str) -> None:
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        try:
            self.server.route(self, method, parsed.path, query)
        except OrchestratorError as exc:
            extra = {}
            if isinstance(exc, ConflictError) and exc.next_free_iso:
                extra["next_free"] = exc.next_free_iso
            self._error(exc.status, str(exc), **extra)
        except UnknownTokenError as exc:
            self._error(401, str(exc))
        except BadPinError as exc:
            self._error(400, str(exc))
        except DuplicatePeerError as exc:
            self._error(409, str(exc))
        except (NoSuchPeerError, StaleSessionError) as exc:
            self._error(404, str(exc))
        except (CloudError, SignalingError) as exc:
            self._error(400, str(exc))
        except BrokenPipeError:
            pass


class _ServiceServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, bind: str, platform: Platform):
        host, port = bind.rsplit(":", 1)
        self.platform = platform
        super().__init__((host, int(port)), _Handler)

    @property
    def bound_address(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start_in_thread(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread

    def route(self, handler: _Handler, method: str, path: str, query: dict) -> None:
        raise NotImplementedError


class CloudServer(_ServiceServer):
    """GET-oriented pin API mirroring common IoT cloud REST conventions."""

    def route(self, handler: _Handler, method: str, path: str, query: dict) -> None:
        cloud = self.platform.cloud
        if method == "GET" and path == "/cloud/get":
            value = cloud.get_pin(query.get("token", ""), query.get("pin", ""))
            handler._reply({"value": value})
        elif method == "GET" and path == "/cloud/update":
            cloud.update_pin(query.get("token", ""), query.get("pin", ""), query.get("value", ""))
            handler._reply({"ok": True})
        elif method == "GET" and path == "/cloud/connected":
            handler._reply({"connected": cloud.is_connected(query.get("token", ""))})
        elif method == "POST" and path == "/cloud/heartbeat":
            body = handler._json_body()
            cloud.heartbeat(body.get("token", ""))
            handler._reply({"ok": True})
        else:
            handler._error(404, f"no route {method} {path}")


class SignalingServer(_ServiceServer):
    """Peer registry plus the persistent frame-stream channel."""

    def route(self, handler: _Handler, method: str, path: str, query: dict) -> None:
        broker = self.platform.broker
        if method == "POST" and path == "/peer/register":
            body = handler._json_body()
            broker.register(body.get("peer_id", ""))
            handler._reply({"ok": True})
        elif method == "POST" and path == "/peer/call":
            body = handler._json_body()
            session = broker.call(
                body.get("caller", ""), body.get("callee", ""), body.get("camera_profile", "")
            )
            handler._reply(
                {"session_id": session.session_id, "latency_ms": session.latency_ms}
            )
        elif method == "POST" and path == "/peer/hangup":
            body = handler._json_body()
            broker.hangup(body.get("session_id", ""), body.get("reason", "hangup"))
            handler._reply({"ok": True})
        elif method == "POST" and path == "/peer/unregister":
            body = handler._json_body()
            broker.unregister(body.get("peer_id", ""))
            handler._reply({"ok": True})
        elif method == "GET" and path == "/peer/registered":
            handler._reply({"registered": broker.is_registered(query.get("peer_id", ""))})
        elif method == "POST" and path == "/peer/publish":
            self._publish(handler, query.get("session_id", ""))
        elif method == "GET" and path == "/peer/stream":
            self._stream(handler, query.get("peer_id", ""))
        else:
            handler._error(404, f"no route {method} {path}")

    def _publish(self, handler: _Handler, session_id: str) -> None:
        from ..physics import Frame, decode_pgm, parse_pgm_metadata

        length = int(handler.headers.get("Content-Length", 0))
        data = handler.rfile.read(length)
        pixels = decode_pgm(data)
        meta = parse_pgm_metadata(data)
        frame = Frame(
            pixels,
            timestamp_ms=float(meta.get("ts", 0.0)),
            camera_id=meta.get("camera", ""),
        )
        frame.seq = int(meta.get("seq", 0))
        delivery = self.platform.broker.publish_frame(session_id, frame)
        handler._reply({"seq": delivery.seq, "due_ms": delivery.due_ms})

    def _stream(self, handler: _Handler, peer_id: str) -> None:
        broker = self.platform.broker
        if not broker.is_registered(peer_id):
            handler._error(404, f"no peer {peer_id!r}")
            return
        ws = handler._upgrade_websocket()
        if ws is None:
            return

        def push(media_session_id: str, frame) -> None:
            try:
                ws.send_binary(
                    encode_pgm(
                        frame,
                        metadata={
                            "camera": frame.camera_id,
                            "seq": frame.seq,
                            "ts": frame.timestamp_ms,
                            "media_session": media_session_id,
                        },
                    )
                )
            except Exception:
                broker.attach_push(peer_id, None)

        backlog = broker.attach_push(peer_id, push)
        for delivered_ms, media_session_id, frame in backlog:
            push(media_session_id, frame)
        try:
            while ws.recv_message() is not None:
                pass  # clients only listen; drain pings and ignore chatter
        finally:
            try:
                broker.attach_push(peer_id, None)
            except SignalingError:
                pass
            ws.close()


class OrchestratorServer(_ServiceServer):
    """Client-facing JSON API plus the device channel endpoint."""

    def route(self, handler: _Handler, method: str, path: str, query: dict) -> None:
        orch = self.platform.orchestrator
        if method == "POST" and path == "/api/login":
            body = handler._json_body()
            token = orch.login(body.get("username", ""), body.get("secret", ""))
            handler._reply({"token": token})
            return
        if method == "POST" and path == "/api/logout":
            orch.logout(handler._bearer())
            handler._reply({"ok": True})
            return
        if method == "GET" and path == "/api/experiments":
            handler._reply({"experiments": orch.list_experiments(handler._bearer())})
            return
        if path == "/device/channel":
            self._device_channel(handler)
            return

        parts = [p for p in path.split("/") if p]
        # /api/experiments/{id}/<verb>
        if len(parts) == 4 and parts[0] == "api" and parts[1] == "experiments":
            experiment_id, verb = parts[2], parts[3]
            token = handler._bearer()
            if method == "POST" and verb == "enter":
                body = handler._json_body()
                ticket = orch.enter_experiment(token, experiment_id, body.get("peer_id", ""))
                ticket.resolved.wait(ENTER_WAIT_S if not self.platform.virtual else 0.0)
                handler._reply(ticket.as_dict())
                return
            if method == "POST" and verb == "input":
                handler._reply(orch.submit_input(token, experiment_id, handler._json_body()))
                return
            if method == "POST" and verb == "leave":
                handler._reply(orch.leave_experiment(token, experiment_id))
                return
            if method == "GET" and verb == "queue":
                handler._reply(orch.queue_status(token, experiment_id))
                return
            if method == "GET" and verb == "output":
                handler._reply(orch.get_output(token, experiment_id))
                return
            if method == "POST" and verb == "book":
                body = handler._json_body()
                start_ms = self._iso_to_ms(body.get("start", ""))
                end_ms = self._iso_to_ms(body.get("end", ""))
                handler._reply(orch.book_slot(token, experiment_id, start_ms, end_ms))
                return
        handler._error(404, f"no route {method} {path}")

    def _iso_to_ms(self, iso: str) -> float:
        try:
            stamp = datetime.fromisoformat(iso)
        except ValueError as exc:
            raise OrchestratorError(f"bad timestamp {iso!r}: {exc}") from exc
        epoch = self.platform.scheduler.utc_at(0)
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=epoch.tzinfo)
        return (stamp - epoch).total_seconds() * 1000.0

    def _device_channel(self, handler: _Handler) -> None:
        ws = handler._upgrade_websocket()
        if ws is None:
            return
        channel = WsChannel(ws)
        self.platform.orchestrator.accept_device_channel(channel)
        channel.pump()  # the handler thread is the reader


def start_servers(platform: Platform) -> dict[str, _ServiceServer]:
    """Bind and start all three services; returns them keyed by role."""
    servers = {
        "cloud": CloudServer(platform.config.cloud_bind, platform),
        "signaling": SignalingServer(platform.config.signaling_bind, platform),
        "orchestrator": OrchestratorServer(platform.config.orchestrator_bind, platform),
    }
    for server in servers.values():
        server.start_in_thread()
    return servers
