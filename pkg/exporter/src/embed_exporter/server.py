"""Sequential HTTP server implementing the ``POST /embed`` contract.

Request: JSON ``{"model": str, "sentences": [str, ...]}``.
Response: ``{"dim": 768, "vectors": [[float; 768], ...]}`` in input order.
Errors: malformed JSON, an empty sentence list, or a model name other than
the loaded one return 400; a batch larger than ``max_batch`` returns 413.
"""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np

from .store import EMBED_DIM

log = logging.getLogger(__name__)

DEFAULT_MAX_BATCH = 256


def make_server(encoder, model_name: str, host: str = "127.0.0.1",
                port: int = 0, max_batch: int = DEFAULT_MAX_BATCH) -> HTTPServer:
    """Bound but not yet serving; ``server_address[1]`` is the real port."""

    class EmbedHandler(BaseHTTPRequestHandler):
        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _fail(self, status: int, message: str) -> None:
            self._reply(status, {"error": message})

        def do_GET(self):                            # noqa: N802
            self._fail(405, "only POST is supported")

        def do_POST(self):                           # noqa: N802
            if self.path.rstrip("/") != "/embed":
                self._fail(404, f"unknown path {self.path!r}")
                return
            try:
                length = int(self.headers.get("Content-Length", ""))
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (TypeError, ValueError, UnicodeDecodeError):
                self._fail(400, "malformed JSON body")
                return
            if not isinstance(body, dict):
                self._fail(400, "request body must be a JSON object")
                return
            sentences = body.get("sentences")
            if not isinstance(sentences, list) \
                    or not all(isinstance(s, str) for s in sentences):
                self._fail(400, "sentences must be a list of strings")
                return
            if not sentences:
                self._fail(400, "empty sentence list")
                return
            if len(sentences) > max_batch:
                self._fail(413, f"batch of {len(sentences)} exceeds the "
                                f"limit of {max_batch}")
                return
            if body.get("model") != model_name:
                self._fail(400, f"server is running {model_name!r}, "
                                f"got {body.get('model')!r}")
                return
            vectors = np.asarray(encoder.encode(sentences), dtype=np.float32)
            if vectors.shape != (len(sentences), EMBED_DIM):
                self._fail(500, f"encoder produced shape "
                                f"{tuple(vectors.shape)}")
                return
            self._reply(200, {"dim": EMBED_DIM,
                              "vectors": [[float(v) for v in row]
                                          for row in vectors]})

        def log_message(self, fmt, *args):           # noqa: A003
            log.debug("%s - %s", self.address_string(), fmt % args)

    return HTTPServer((host, port), EmbedHandler)


def serve(encoder, model_name: str, host: str = "127.0.0.1", port: int = 8000,
          max_batch: int = DEFAULT_MAX_BATCH) -> None:
    server = make_server(encoder, model_name, host, port, max_batch)
    log.info("serving %s on http://%s:%d/embed", model_name,
             *server.server_address)
    try:
        server.serve_forever()
    finally:
        server.server_close()
