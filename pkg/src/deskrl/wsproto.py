"""Minimal RFC 6455 WebSocket framing over blocking sockets.

Just enough for the demonstration service and its tests: handshake on
both ends, text/binary/ping/pong/close frames, client-side masking,
simple continuation handling. No extensions, no TLS.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT, OP_TEXT, OP_BINARY = 0x0, 0x1, 0x2
OP_CLOSE, OP_PING, OP_PONG = 0x8, 0x9, 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def encode_frame(opcode: int, payload: bytes, mask: bool = False) -> bytes:
    head = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head.append(mask_bit | n)
    elif n < 1 << 16:
        head.append(mask_bit | 126)
        head += struct.pack(">H", n)
    else:
        head.append(mask_bit | 127)
        head += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        head += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(head) + payload


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ConnectionError("socket closed mid-frame")
        buf += chunk
    return buf


def read_frame(sock: socket.socket) -> tuple[int, bytes, bool]:
    """Returns (opcode, payload, fin)."""
    b0, b1 = _read_exact(sock, 2)
    fin = bool(b0 & 0x80)
    opcode = b0 & 0x0F
    masked = bool(b1 & 0x80)
    n = b1 & 0x7F
    if n == 126:
        (n,) = struct.unpack(">H", _read_exact(sock, 2))
    elif n == 127:
        (n,) = struct.unpack(">Q", _read_exact(sock, 8))
    key = _read_exact(sock, 4) if masked else None
    payload = _read_exact(sock, n)
    if key:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload, fin


def read_message(sock: socket.socket) -> tuple[int, bytes] | None:
    """One complete message, transparently answering pings.
    None on a clean close."""
    opcode, payload, fin = read_frame(sock)
    while True:
        if opcode == OP_PING:
            sock.sendall(encode_frame(OP_PONG, payload))
            opcode, payload, fin = read_frame(sock)
            continue
        if opcode == OP_CLOSE:
            try:
                sock.sendall(encode_frame(OP_CLOSE, b""))
            except OSError:
                pass
            return None
        break
    parts = [payload]
    first_op = opcode
    while not fin:
        opcode, payload, fin = read_frame(sock)
        if opcode == OP_CONT:
            parts.append(payload)
    return first_op, b"".join(parts)


def client_handshake(sock: socket.socket, host: str, path: str = "/ws"):
    key = base64.b64encode(os.urandom(16)).decode()
    req = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    sock.sendall(req.encode())
    response = b""
    while b"\r\n\r\n" not in response:
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("server closed during handshake")
        response += chunk
    status = response.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise ConnectionError(f"websocket handshake refused: {status.decode(errors='replace')}")
    for line in response.split(b"\r\n"):
        if line.lower().startswith(b"sec-websocket-accept:"):
            got = line.split(b":", 1)[1].strip().decode()
            if got != accept_key(key):
                raise ConnectionError("bad Sec-WebSocket-Accept")
            return
    raise ConnectionError("missing Sec-WebSocket-Accept")


class WebSocketClient:
    """Blocking client used by tests and utilities."""

    def __init__(self, host: str, port: int, path: str = "/ws", timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        client_handshake(self.sock, f"{host}:{port}", path)

    def send_json(self, obj):
        import json

        self.sock.sendall(encode_frame(OP_TEXT, json.dumps(obj).encode(), mask=True))

    def recv(self) -> tuple[int, bytes] | None:
        return read_message(self.sock)

    def close(self):
        try:
            self.sock.sendall(encode_frame(OP_CLOSE, b"", mask=True))
        except OSError:
            pass
        self.sock.close()
