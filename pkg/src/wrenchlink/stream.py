"""Telemetry streaming and live tuning endpoint for a running pipeline.

The wire protocol is newline-delimited JSON messages, each carrying a `type`
field, opened by a server `hello` that includes the protocol version, current
config, and a patchable-parameter schema. One listening port serves three
transports, sniffed from the first bytes of each connection:

* an HTTP GET with `Upgrade: websocket` speaks the same messages as WebSocket
  text frames (one JSON message per frame) for the browser console,
* any other HTTP GET serves static console assets when an assets directory
  is configured,
* anything else is a raw TCP client writing newline-terminated JSON.

Inbound messages (`config_patch`, `inject_wrench`, `inject_hall`) are queued
and applied only at tick boundaries; each applied message is acknowledged
with the tick index at which it took effect, and rejected ones get an
`error` reply without touching pipeline state. Outbound telemetry goes
through per-client bounded queues that drop oldest-first when full, so a
slow or absent client can never stall or perturb the loop.
"""

from __future__ import annotations

import base64
import hashlib
import json
import mimetypes
import os
import queue
import socket
import struct
import threading
import time
from typing import Optional

from .config import ConfigError, config_schema
from .pipeline import Pipeline, TickReport

PROTOCOL_NAME = "wrenchlink-stream"
PROTOCOL_VERSION = 1

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
_OUTBOUND_QUEUE_MAX = 256


def hello_message(pipeline: Pipeline) -> dict:
    return {
        "type": "hello",
        "protocol": PROTOCOL_NAME,
        "version": PROTOCOL_VERSION,
        "tick_rate_hz": pipeline.cfg.tick_rate_hz,
        "theta_init": list(pipeline.cfg.theta_init),
        "config_schema": config_schema(pipeline.cfg),
    }


def tick_message(report: TickReport) -> dict:
    return {
        "type": "tick",
        "tick": report.tick,
        "t_us": report.t_us,
        "wrench": list(report.wrench.components()),
        "servo": {"angles": list(report.servo.angles), "clamped": list(report.servo.clamped)},
        "fingers": {
            "bend": list(report.fingers.bend),
            "pinch_state": report.fingers.pinch_state.value,
            "pinch_blend": report.fingers.pinch_blend,
        },
        "haptic": list(report.haptic.duty),
        "stage_us": report.stage_us,
    }


class _RawTransport:
    """Newline-delimited JSON over a plain TCP socket."""

    def __init__(self, sock: socket.socket, prefix: bytes = b"") -> None:
        self._sock = sock
        self._buffer = prefix

    def send_text(self, line: str) -> None:
        self._sock.sendall(line.encode("utf-8") + b"\n")

    def recv_texts(self):
        while True:
            while b"\n" in self._buffer:
                line, self._buffer = self._buffer.split(b"\n", 1)
                text = line.decode("utf-8", errors="replace").strip()
                if text:
                    yield text
            chunk = self._sock.recv(65536)
            if not chunk:
                return
            self._buffer += chunk

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class _WsTransport:
    """Minimal RFC 6455 server-side framing; one JSON message per text frame."""

    def __init__(self, sock: socket.socket, prefix: bytes = b"") -> None:
        self._sock = sock
        self._buffer = prefix
        self._send_lock = threading.Lock()

    def _read_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            chunk = self._sock.recv(65536)
            if not chunk:
                raise ConnectionError("websocket peer closed")
            self._buffer += chunk
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        header = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            header += bytes([n])
        elif n < 1 << 16:
            header += bytes([126]) + struct.pack(">H", n)
        else:
            header += bytes([127]) + struct.pack(">Q", n)
        with self._send_lock:
            self._sock.sendall(header + payload)

    def send_text(self, line: str) -> None:
        self._send_frame(0x1, line.encode("utf-8"))

    def recv_texts(self):
        fragments: list[bytes] = []
        while True:
            b0, b1 = self._read_exact(2)
            fin, opcode = b0 & 0x80, b0 & 0x0F
            masked, length = b1 & 0x80, b1 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", self._read_exact(2))
            elif length == 127:
                (length,) = struct.unpack(">Q", self._read_exact(8))
            mask = self._read_exact(4) if masked else b"\x00" * 4
            payload = self._read_exact(length)
            if masked:
                payload = bytes(c ^ mask[i % 4] for i, c in enumerate(payload))
            if opcode == 0x8:  # close
                try:
                    self._send_frame(0x8, b"")
                except OSError:
                    pass
                return
            if opcode == 0x9:  # ping -> pong
                self._send_frame(0xA, payload)
                continue
            if opcode in (0x1, 0x0):
                fragments.append(payload)
                if fin:
                    text = b"".join(fragments).decode("utf-8", errors="replace").strip()
                    fragments = []
                    if text:
                        yield text
            # binary and pong frames are ignored

    def close(self) -> None:
        try:
            self._send_frame(0x8, b"")
        except OSError:
            pass
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class _Client:
    """One connected telemetry consumer with a lossy outbound queue."""

    _ids = 0

    def __init__(self, transport, server: "StreamServer") -> None:
        _Client._ids += 1
        self.id = _Client._ids
        self.transport = transport
        self._server = server
        self._outbound: queue.Queue[Optional[str]] = queue.Queue(maxsize=_OUTBOUND_QUEUE_MAX)
        self.alive = True
        self._writer = threading.Thread(target=self._write_loop, daemon=True)
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    def start(self) -> None:
        self._writer.start()
        self._reader.start()

    def send(self, message: dict) -> None:
        """Enqueue without blocking; drop the oldest message when full."""
        line = json.dumps(message, separators=(",", ":"))
        try:
            self._outbound.put_nowait(line)
        except queue.Full:
            try:
                self._outbound.get_nowait()
            except queue.Empty:
                pass
            try:
                self._outbound.put_nowait(line)
            except queue.Full:
                pass

    def _write_loop(self) -> None:
        while True:
            line = self._outbound.get()
            if line is None:
                return
            try:
                self.transport.send_text(line)
            except OSError:
                self.alive = False
                return

    def _read_loop(self) -> None:
        try:
            for text in self.transport.recv_texts():
                self._server._on_client_text(self, text)
        except (OSError, ConnectionError):
            pass
        finally:
            self.alive = False
            self._server._forget(self)

    def close(self) -> None:
        self.alive = False
        try:
            self._outbound.put_nowait(None)
        except queue.Full:
            pass
        self.transport.close()


class StreamServer:
    """Accepts clients and runs the tick loop with boundary-synchronized control.

    The loop thread (whoever calls run()) is the only mutator of pipeline
    state; reader threads just parse messages into the inbound queue.
    """

    def __init__(
        self,
        pipeline: Pipeline,
        host: str = "127.0.0.1",
        port: int = 0,
        assets_dir: str | None = None,
    ) -> None:
        self.pipeline = pipeline
        self.assets_dir = assets_dir
        self._listener = socket.create_server((host, port))
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._inbound: queue.Queue[tuple[_Client, dict]] = queue.Queue()
        self._stop = threading.Event()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._started = False

    @property
    def address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    def start(self) -> "StreamServer":
        if not self._started:
            self._accept_thread.start()
            self._started = True
        return self

    # -- connection handling -------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(target=self._handshake, args=(sock,), daemon=True).start()

    def _handshake(self, sock: socket.socket) -> None:
        # HTTP and WebSocket clients send their request immediately; a raw
        # telemetry consumer may connect and only read. Sniff briefly, then
        # default to the raw transport so passive clients still get hello.
        try:
            sock.settimeout(0.25)
            try:
                first = sock.recv(65536)
            except (TimeoutError, socket.timeout):
                first = b""
            finally:
                sock.settimeout(None)
        except OSError:
            sock.close()
            return
        if first.startswith((b"GET ", b"HEAD", b"POST", b"OPTIONS")):
            self._handle_http(sock, first)
        else:
            self._attach(_RawTransport(sock, prefix=first))

    def _handle_http(self, sock: socket.socket, first: bytes) -> None:
        data = first
        while b"\r\n\r\n" not in data:
            chunk = sock.recv(65536)
            if not chunk:
                sock.close()
                return
            data += chunk
        head, rest = data.split(b"\r\n\r\n", 1)
        lines = head.decode("latin-1").split("\r\n")
        request = lines[0].split(" ")
        headers = {}
        for line in lines[1:]:
            if ":" in line:
                k, v = line.split(":", 1)
                headers[k.strip().lower()] = v.strip()

        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key", "")
            accept = base64.b64encode(
                hashlib.sha1((key + _WS_GUID).encode("latin-1")).digest()
            ).decode("ascii")
            sock.sendall(
                (
                    "HTTP/1.1 101 Switching Protocols\r\n"
                    "Upgrade: websocket\r\n"
                    "Connection: Upgrade\r\n"
                    f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
                ).encode("latin-1")
            )
            self._attach(_WsTransport(sock, prefix=rest))
            return

        path = request[1] if len(request) > 1 else "/"
        self._serve_asset(sock, path.split("?", 1)[0])

    def _serve_asset(self, sock: socket.socket, path: str) -> None:
        try:
            if self.assets_dir is None:
                body, status, ctype = b"no assets configured", "404 Not Found", "text/plain"
            else:
                rel = path.lstrip("/") or "index.html"
                full = os.path.realpath(os.path.join(self.assets_dir, rel))
                root = os.path.realpath(self.assets_dir)
                if not full.startswith(root + os.sep) and full != root:
                    body, status, ctype = b"forbidden", "403 Forbidden", "text/plain"
                elif os.path.isfile(full):
                    with open(full, "rb") as fh:
                        body = fh.read()
                    status = "200 OK"
                    ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
                else:
                    body, status, ctype = b"not found", "404 Not Found", "text/plain"
            sock.sendall(
                (
                    f"HTTP/1.1 {status}\r\n"
                    f"Content-Type: {ctype}\r\n"
                    f"Content-Length: {len(body)}\r\n"
                    "Connection: close\r\n\r\n"
                ).encode("latin-1")
                + body
            )
        except OSError:
            pass
        finally:
            sock.close()

    def _attach(self, transport) -> None:
        client = _Client(transport, self)
        client.send(hello_message(self.pipeline))
        with self._clients_lock:
            self._clients.append(client)
        client.start()

    def _forget(self, client: _Client) -> None:
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)

    def _on_client_text(self, client: _Client, text: str) -> None:
        try:
            obj = json.loads(text)
            if not isinstance(obj, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as exc:
            client.send({"type": "error", "message": f"malformed message: {exc}"})
            return
        self._inbound.put((client, obj))

    # -- tick-boundary application of inbound control --------------------------

    def _apply_inbound(self) -> None:
        effective_tick = self.pipeline.tick_index
        while True:
            try:
                client, obj = self._inbound.get_nowait()
            except queue.Empty:
                return
            msg_id = obj.get("id")
            mtype = obj.get("type")
            try:
                if mtype == "config_patch":
                    self.pipeline.patch_config(obj.get("fields", {}))
                elif mtype == "inject_wrench":
                    if obj.get("clear"):
                        self.pipeline.inject_wrench(None)
                    else:
                        self.pipeline.inject_wrench(obj.get("wrench", {}))
                elif mtype == "inject_hall":
                    if obj.get("clear"):
                        self.pipeline.inject_hall(None)
                    else:
                        self.pipeline.inject_hall(obj.get("h"))
                else:
                    raise ValueError(f"unknown message type {mtype!r}")
            except (ConfigError, ValueError, TypeError) as exc:
                client.send({"type": "error", "id": msg_id, "message": str(exc)})
                continue
            reply = {"type": "ack", "id": msg_id, "effective_tick": effective_tick}
            if mtype == "config_patch":
                reply["config_schema"] = config_schema(self.pipeline.cfg)
            client.send(reply)

    def _broadcast(self, message: dict) -> None:
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            if client.alive:
                client.send(message)

    # -- the loop ---------------------------------------------------------------

    def run(self, ticks: int | None = None, pace: bool = True) -> None:
        """Run the pipeline, draining control messages at each tick boundary.

        With pace=True the loop tracks wall time at the configured rate;
        pacing never affects outputs since all time comes from the sim clock.
        """
        self.start()
        period = 1.0 / self.pipeline.cfg.tick_rate_hz
        t0 = time.perf_counter()
        done = 0
        while not self._stop.is_set() and (ticks is None or done < ticks):
            self._apply_inbound()
            report = self.pipeline.tick()
            if report.tick % self.pipeline.cfg.stream_decimation == 0:
                self._broadcast(tick_message(report))
            done += 1
            if pace:
                target = t0 + done * period
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)

    def stop(self) -> None:
        self._stop.set()

    def close(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._clients_lock:
            clients = list(self._clients)
        for client in clients:
            client.close()

    def __enter__(self) -> "StreamServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.close()


def serve_stream(
    pipeline: Pipeline,
    host: str = "127.0.0.1",
    port: int = 0,
    assets_dir: str | None = None,
) -> StreamServer:
    """Create and start a streaming session bound to (host, port)."""
    return StreamServer(pipeline, host, port, assets_dir=assets_dir).start()
