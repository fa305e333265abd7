"""Minimal WebSocket framing (RFC 6455) over plain sockets.

Enough of the protocol for persistent bidirectional channels between this
package's services, its device agents, and browser clients: HTTP upgrade
handshake, text/binary frames, ping/pong, close. No extensions, no
fragmentation of outgoing messages.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    while count > 0:
        chunk = sock.recv(count)
        if not chunk:
            raise WebSocketError("socket closed mid-frame")
        chunks.append(chunk)
        count -= len(chunk)
    return b"".join(chunks)


class WebSocketConnection:
    """One open WebSocket; thread-safe sends, blocking receive."""

    def __init__(self, sock: socket.socket, mask_outgoing: bool):
        self._sock = sock
        self._mask = mask_outgoing
        self._send_lock = threading.Lock()
        self.closed = False

    # -- sending ---------------------------------------------------------------

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        header = bytearray([0x80 | opcode])
        length = len(payload)
        mask_bit = 0x80 if self._mask else 0x00
        if length < 126:
            header.append(mask_bit | length)
        elif length < 1 << 16:
            header.append(mask_bit | 126)
            header += struct.pack("!H", length)
        else:
            header.append(mask_bit | 127)
            header += struct.pack("!Q", length)
        if self._mask:
            key = os.urandom(4)
            header += key
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        with self._send_lock:
            if self.closed:
                raise WebSocketError("connection closed")
            try:
                self._sock.sendall(bytes(header) + payload)
            except OSError as exc:
                self.closed = True
                raise WebSocketError(f"send failed: {exc}") from exc

    def send_text(self, text: str) -> None:
        self._send_frame(OP_TEXT, text.encode("utf-8"))

    def send_binary(self, data: bytes) -> None:
        self._send_frame(OP_BINARY, data)

    # -- receiving --------------------------------------------------------------

    def recv_message(self) -> tuple[int, bytes] | None:
        """Next text/binary message, transparently answering pings.

        Returns None when the peer closes.
        """
        buffered_op: int | None = None
        buffered: list[bytes] = []
        while True:
            try:
                first = _read_exact(self._sock, 2)
            except (WebSocketError, OSError):
                self.closed = True
                return None
            fin = bool(first[0] & 0x80)
            opcode = first[0] & 0x0F
            masked = bool(first[1] & 0x80)
            length = first[1] & 0x7F
            if length == 126:
                length = struct.unpack("!H", _read_exact(self._sock, 2))[0]
            elif length == 127:
                length = struct.unpack("!Q", _read_exact(self._sock, 8))[0]
            key = _read_exact(self._sock, 4) if masked else None
            payload = _read_exact(self._sock, length) if length else b""
            if key is not None:
                payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))

            if opcode == OP_CLOSE:
                self.closed = True
                try:
                    self._send_frame(OP_CLOSE, b"")
                except WebSocketError:
                    pass
                return None
            if opcode == OP_PING:
                try:
                    self._send_frame(OP_PONG, payload)
                except WebSocketError:
                    return None
                continue
            if opcode == OP_PONG:
                continue
            if opcode in (OP_TEXT, OP_BINARY):
                if not fin:
                    buffered_op = opcode
                    buffered = [payload]
                    continue
                return opcode, payload
            if opcode == OP_CONT:
                buffered.append(payload)
                if fin and buffered_op is not None:
                    return buffered_op, b"".join(buffered)
                continue
            raise WebSocketError(f"unsupported opcode {opcode}")

    def close(self) -> None:
        if not self.closed:
            try:
                self._send_frame(OP_CLOSE, b"")
            except WebSocketError:
                pass
            self.closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def connect(host: str, port: int, path: str, timeout: float = 5.0) -> WebSocketConnection:
    """Client-side handshake; returns a connection that masks outgoing frames."""
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.settimeout(None)
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n"
        "\r\n"
    )
    sock.sendall(request.encode("ascii"))
    response = b""
    while b"\r\n\r\n" not in response:
        chunk = sock.recv(4096)
        if not chunk:
            raise WebSocketError("server closed during handshake")
        response += chunk
    status_line = response.split(b"\r\n", 1)[0]
    if b"101" not in status_line:
        raise WebSocketError(f"handshake rejected: {status_line.decode(errors='replace')}")
    headers = {}
    for line in response.split(b"\r\n")[1:]:
        if b":" in line:
            name, value = line.split(b":", 1)
            headers[name.strip().lower().decode()] = value.strip().decode()
    if headers.get("sec-websocket-accept") != accept_key(key):
        raise WebSocketError("bad accept key")
    return WebSocketConnection(sock, mask_outgoing=True)
