"""HTTP front of the clearinghouse.

GET  /api/config     current experiment configuration
POST /api/migration  migration report in, migration reply out
GET  /api/stats      live experiment status
GET  /...            browser client static assets (when a static dir is set)

Bodies are the protocol module's canonical JSON, UTF-8. The handler pool is
the stdlib threading server; every request handler funnels state changes
through the hub's single lock.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .protocol import (
    ParseError,
    SchemaError,
    ValidationError,
    decode_report,
    encode_config,
    encode_reply,
)
from .server import ExperimentHub, ReportRejected

log = logging.getLogger(__name__)

MAX_BODY_BYTES = 1 << 20

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>gahub</title></head>
<body>
<h1>gahub clearinghouse</h1>
<p>No browser client assets are installed. The JSON API is live:</p>
<ul>
<li><a href="/api/config">/api/config</a></li>
<li><a href="/api/stats">/api/stats</a></li>
</ul>
</body></html>
"""


class HubServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, hub: ExperimentHub, static_dir: str | Path | None = None):
        super().__init__(address, HubRequestHandler)
        self.hub = hub
        self.static_dir = Path(static_dir) if static_dir else None


class HubRequestHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server: HubServer

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes, content_type: str):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, text: str):
        self._send(status, text.encode("utf-8"), "application/json; charset=utf-8")

    def _send_error_json(self, status: int, message: str):
        self._send_json(status, json.dumps({"error": message}))

    # -- routes ---------------------------------------------------------------

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/api/config":
            self._send_json(200, encode_config(self.server.hub.get_config()))
        elif path == "/api/stats":
            self._send_json(200, json.dumps(self.server.hub.get_stats()))
        elif path.startswith("/api/"):
            self._send_error_json(404, f"unknown endpoint {path}")
        else:
            self._serve_static(path)

    def do_POST(self):
        path = self.path.split("?", 1)[0]
        if path != "/api/migration":
            self._send_error_json(404, f"unknown endpoint {path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._send_error_json(400, "bad Content-Length")
            return
        if length <= 0 or length > MAX_BODY_BYTES:
            self._send_error_json(400, "missing or oversized body")
            return
        body = self.rfile.read(length)
        try:
            text = body.decode("utf-8")
        except UnicodeDecodeError:
            self._send_error_json(400, "body is not UTF-8")
            return

        hub = self.server.hub
        try:
            report = decode_report(text, hub.get_config().ga.genome_length)
            reply = hub.handle_migration(report)
        except (ParseError, SchemaError) as exc:
            self._send_error_json(400, str(exc))
            return
        except ValidationError as exc:
            self._send_error_json(422, str(exc))
            return
        except ReportRejected as exc:
            self._send_error_json(422, f"report rejected: {exc}")
            return
        self._send_json(200, encode_reply(reply))

    # -- static assets ----------------------------------------------------------

    def _serve_static(self, path: str):
        static_dir = self.server.static_dir
        if path == "/":
            path = "/index.html"
        if static_dir is not None:
            root = static_dir.resolve()
            target = (root / path.lstrip("/")).resolve()
            if root in target.parents or target == root:
                if target.is_file():
                    ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
                    self._send(200, target.read_bytes(), ctype)
                    return
        if path == "/index.html":
            self._send(200, _PLACEHOLDER_PAGE.encode("utf-8"), "text/html; charset=utf-8")
        else:
            self._send_error_json(404, f"no such file {path}")


def start_server(
    hub: ExperimentHub,
    host: str = "127.0.0.1",
    port: int = 8080,
    static_dir: str | Path | None = None,
) -> tuple[HubServer, threading.Thread]:
    """Bind, start serving on a background thread, and return (server, thread)."""
    server = HubServer((host, port), hub, static_dir)
    thread = threading.Thread(target=server.serve_forever, name="gahub-http", daemon=True)
    thread.start()
    return server, thread
