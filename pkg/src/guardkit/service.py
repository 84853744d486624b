"""Minimal HTTP guard service.

POST /v1/guard takes a benchmark-case-shaped JSON body and answers with the
verdict JSON; GET /healthz reports liveness. Bodies over 1 MiB are rejected
with 413 before being read into memory.
"""
from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional

from .bench import BenchError, GuardCase
from .bridge import BackendError, NetworkError
from .core import InvalidValueError
from .gdsl.pipeline import ExternalUnavailableError
from .toolbox import UnknownRoleError

MAX_BODY_BYTES = 1 << 20

#: Maps a parsed case to the response payload (typically verdict JSON).
GuardRunner = Callable[[GuardCase], dict]


class _Handler(BaseHTTPRequestHandler):
    server_version = "guardkit"
    runner: GuardRunner  # injected by make_server

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self) -> None:  # noqa: N802 (http.server API)
        if self.path == "/healthz":
            self._send_json(200, {"status": "ok"})
        else:
            self._send_json(404, {"error": "not found"})

    def do_POST(self) -> None:  # noqa: N802
        if self.path != "/v1/guard":
            self._send_json(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY_BYTES:
            self._send_json(413, {"error": f"body exceeds {MAX_BODY_BYTES} bytes"})
            return
        raw = self.rfile.read(length)
        try:
            parsed = json.loads(raw)
            case = GuardCase.from_dict(parsed)
        except (json.JSONDecodeError, TypeError, KeyError) as exc:
            self._send_json(400, {"error": f"malformed body: {exc}"})
            return
        except (InvalidValueError, ValueError, BenchError) as exc:
            self._send_json(422, {"error": str(exc)})
            return
        try:
            payload = type(self).runner(case)
        except (UnknownRoleError, BenchError, InvalidValueError) as exc:
            self._send_json(422, {"error": str(exc)})
            return
        except (NetworkError, ExternalUnavailableError, BackendError) as exc:
            self._send_json(503, {"error": str(exc)})
            return
        self._send_json(200, payload)


def make_server(runner: GuardRunner, port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"runner": staticmethod(runner)})
    return ThreadingHTTPServer((host, port), handler)


def serve(
    runner: GuardRunner,
    port: int,
    host: str = "127.0.0.1",
    ready: Optional[threading.Event] = None,
) -> None:
    """Run the service until interrupted; ``ready`` is set once bound."""
    server = make_server(runner, port, host)
    if ready is not None:
        ready.set()
    try:
        server.serve_forever()
    finally:
        server.server_close()
