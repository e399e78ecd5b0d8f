"""Live demonstration-collection service.

One HTTP server: plain GETs serve the browser client's static assets,
and GET /ws upgrades to a WebSocket session. A session owns one env,
ticks it at a fixed rate under the most recently received action
(latest-wins, matching a held key), streams one binary frame message per
step, and records everything for archiving.

Client -> server: JSON text, {"type": hello|action|reset|save|discard|stop}.
Server -> client: binary frame = u32le step, f32le last reward, u8
terminal, f32le score, 7744 frame bytes; JSON text for status.
"""

from __future__ import annotations

import json
import logging
import struct
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from . import wsproto
from .demos import DemoEpisode, append_episode
from .envs import env_spec, make_env

log = logging.getLogger(__name__)

FRAME_HEAD = struct.Struct("<IfBf")
TICK_HZ = 15.0


class Session:
    """One env under live control, plus the recording buffer."""

    def __init__(self, env_id: str, seed: int, send, tick_hz: float = TICK_HZ):
        self.spec = env_spec(env_id)
        self.env = make_env(env_id)
        self.send = send  # callable(opcode, payload-bytes)
        self.tick_period = 1.0 / tick_hz
        self.seed = seed
        self.held_action = 0
        self.awaiting_decision = False
        self.stop_flag = False
        self.lock = threading.Lock()
        self.send_times: list[float] = []
        self._begin_episode(seed)

    def _begin_episode(self, seed: int):
        self.episode_seed = seed
        frame = self.env.reset(seed)
        self.frames = [frame.copy()]
        self.actions: list[int] = []
        self.rewards: list[float] = []
        self.held_action = 0
        self.awaiting_decision = False

    # -- control messages (connection handler thread) -------------------
    def on_message(self, msg: dict) -> dict | None:
        kind = msg.get("type")
        with self.lock:
            if kind == "hello":
                return {
                    "type": "hello",
                    "env": self.spec.id,
                    "env_version": self.spec.version,
                    "actions": list(self.spec.actions),
                    "tick_hz": 1.0 / self.tick_period,
                    "seed": self.episode_seed,
                }
            if kind == "action":
                index = msg.get("index")
                if not isinstance(index, int) or not 0 <= index < self.spec.n_actions:
                    return {"type": "warning", "message": f"bad action index {index!r}"}
                self.held_action = index
                return None
            if kind == "reset":
                self._begin_episode(self.seed + int(msg.get("bump", 1)))
                self.seed = self.episode_seed
                return {"type": "reset", "seed": self.episode_seed}
            if kind == "discard":
                self._begin_episode(self.seed + 1)
                self.seed = self.episode_seed
                return {"type": "discarded", "seed": self.episode_seed}
            if kind == "stop":
                self.stop_flag = True
                return {"type": "stopped"}
            if kind == "save":
                return {"type": "warning", "message": "save handled by server"}
        return {"type": "warning", "message": f"unknown message type {kind!r}"}

    def episode(self) -> DemoEpisode:
        n = len(self.actions)
        return DemoEpisode(
            frames=np.stack(self.frames[:n]),
            actions=np.asarray(self.actions, np.int64),
            rewards=np.asarray(self.rewards, np.float32),
            terminal=self.env.terminal and not self.env.truncated,
            seed=self.episode_seed,
        )

    def save(self, archive_path) -> dict:
        with self.lock:
            if not self.actions:
                return {"type": "warning", "message": "nothing recorded yet"}
            try:
                row = append_episode(archive_path, self.spec, self.episode())
            except OSError as e:
                # keep the buffer so the client can retry
                log.warning("archive write failed: %s", e)
                return {"type": "error", "message": f"write failed: {e}"}
            self._begin_episode(self.seed + 1)
            self.seed = self.episode_seed
            return {"type": "saved", **row}

    # -- tick loop (session thread) --------------------------------------
    def run(self):
        next_tick = time.monotonic()
        while not self.stop_flag:
            now = time.monotonic()
            if now < next_tick:
                time.sleep(min(next_tick - now, self.tick_period))
                continue
            next_tick += self.tick_period
            with self.lock:
                if self.awaiting_decision:
                    continue
                action = self.held_action
                result = self.env.step(action)
                self.actions.append(action)
                self.rewards.append(result.reward)
                if not result.terminal:
                    self.frames.append(result.frame.copy())
                else:
                    self.awaiting_decision = True
                payload = FRAME_HEAD.pack(
                    len(self.actions), result.reward, 1 if result.terminal else 0,
                    result.score) + result.frame.tobytes()
            self.send_times.append(time.monotonic())
            try:
                self.send(wsproto.OP_BINARY, payload)
            except OSError:
                log.info("client went away; session ends")
                return


class _BufferedSock:
    """recv/sendall view over the handler's buffered rfile (which may
    already hold frame bytes that arrived with the request)."""

    def __init__(self, rfile, sock):
        self._rfile = rfile
        self._sock = sock

    def recv(self, n):
        return self._rfile.read(n)

    def sendall(self, data):
        self._sock.sendall(data)


class _Handler(BaseHTTPRequestHandler):
    server_version = "deskrl-demo"

    def log_message(self, fmt, *args):
        log.debug("http: " + fmt, *args)

    def do_GET(self):
        if self.path.startswith("/ws"):
            self._websocket()
        else:
            self._static()

    def _static(self):
        root: Path | None = self.server.asset_dir
        if root is None:
            self.send_error(404, "no assets configured; connect to /ws")
            return
        name = self.path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self.send_error(404)
            return
        body = target.read_bytes()
        ctype = {
            ".html": "text/html", ".js": "text/javascript",
            ".css": "text/css", ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _websocket(self):
        key = self.headers.get("Sec-WebSocket-Key")
        if self.headers.get("Upgrade", "").lower() != "websocket" or not key:
            self.send_error(400, "expected websocket upgrade")
            return
        if not self.server.claim_session():
            self.send_error(409, "a session is already active")
            return
        try:
            self.send_response(101, "Switching Protocols")
            self.send_header("Upgrade", "websocket")
            self.send_header("Connection", "Upgrade")
            self.send_header("Sec-WebSocket-Accept", wsproto.accept_key(key))
            self.end_headers()
            self.wfile.flush()
            self._session_loop(self.connection)
        finally:
            self.server.release_session()
            self.close_connection = True

    def _session_loop(self, sock):
        send_lock = threading.Lock()
        reader = _BufferedSock(self.rfile, sock)

        def send(opcode, payload):
            with send_lock:
                sock.sendall(wsproto.encode_frame(opcode, payload))

        srv = self.server
        session = Session(srv.env_id, srv.seed, send, tick_hz=srv.tick_hz)
        srv.last_session = session
        ticker = threading.Thread(target=session.run, name="session-tick", daemon=True)
        started = False
        try:
            while True:
                try:
                    msg = wsproto.read_message(reader)
                except (ConnectionError, OSError):
                    break
                if msg is None:
                    break
                opcode, payload = msg
                if opcode != wsproto.OP_TEXT:
                    send(wsproto.OP_TEXT, json.dumps(
                        {"type": "warning", "message": "binary messages ignored"}).encode())
                    continue
                try:
                    parsed = json.loads(payload)
                    if not isinstance(parsed, dict):
                        raise ValueError("not an object")
                except ValueError as e:
                    send(wsproto.OP_TEXT, json.dumps(
                        {"type": "warning", "message": f"malformed message: {e}"}).encode())
                    continue
                if parsed.get("type") == "save":
                    reply = session.save(srv.archive_path)
                else:
                    reply = session.on_message(parsed)
                if reply is not None:
                    send(wsproto.OP_TEXT, json.dumps(reply).encode())
                if parsed.get("type") == "hello" and not started:
                    # first frame only after the hello reply is on the wire
                    ticker.start()
                    started = True
                if session.stop_flag:
                    break
        finally:
            session.stop_flag = True
            if started:
                ticker.join(timeout=2.0)


class DemoServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, env_id: str, seed: int, archive_path, host: str = "127.0.0.1",
                 port: int = 0, asset_dir=None, tick_hz: float = TICK_HZ):
        super().__init__((host, port), _Handler)
        self.env_id = env_id
        self.seed = seed
        self.archive_path = archive_path
        self.asset_dir = Path(asset_dir) if asset_dir else None
        self.tick_hz = tick_hz
        self.last_session: Session | None = None
        self._session_lock = threading.Lock()
        self._session_active = False

    @property
    def port(self) -> int:
        return self.server_address[1]

    def claim_session(self) -> bool:
        with self._session_lock:
            if self._session_active:
                return False
            self._session_active = True
            return True

    def release_session(self):
        with self._session_lock:
            self._session_active = False


def serve(env_id: str, seed: int, archive_path, host="127.0.0.1", port=8700,
          asset_dir=None, tick_hz: float = TICK_HZ) -> DemoServer:
    server = DemoServer(env_id, seed, archive_path, host, port, asset_dir, tick_hz)
    thread = threading.Thread(target=server.serve_forever, name="demo-server", daemon=True)
    thread.start()
    log.info("demo server for %s on %s:%d (archive: %s)",
             env_id, host, server.port, archive_path)
    return server
