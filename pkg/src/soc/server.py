"""Minimal JSON-over-HTTP service: /score, /rank and /health."""

from __future__ import annotations

import json
import logging
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import InputError, SOCError
from .rank import Window, rank_tokens

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


class BadRequest(Exception):
    pass


class SOCService:
    """Request handling independent of the HTTP transport.

    ``handle`` returns ``(status, body)`` and is a pure function of the loaded
    model, store and request.
    """

    def __init__(self, predictor=None, store=()):
        self.predictor = predictor
        self.store = list(store)

    def handle(self, method, path, body=b""):
        try:
            if method == "GET" and path == "/health":
                return HTTPStatus.OK, {"status": "ok"}
            if method == "POST" and path == "/score":
                return HTTPStatus.OK, self.score(self._json(body))
            if method == "POST" and path == "/rank":
                return HTTPStatus.OK, self.rank(self._json(body))
            if path in ("/health", "/score", "/rank"):
                return HTTPStatus.METHOD_NOT_ALLOWED, {"error": f"{method} not allowed on {path}"}
            return HTTPStatus.NOT_FOUND, {"error": f"no route {path}"}
        except (BadRequest, InputError) as exc:
            return HTTPStatus.BAD_REQUEST, {"error": str(exc)}
        except SOCError as exc:
            log.exception("request failed")
            return HTTPStatus.INTERNAL_SERVER_ERROR, {"error": str(exc)}

    @staticmethod
    def _json(body):
        try:
            obj = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, ValueError) as exc:
            raise BadRequest(f"malformed JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise BadRequest("request body must be a JSON object")
        return obj

    def score(self, req):
        text = req.get("text")
        if not isinstance(text, str):
            raise BadRequest('missing string field "text"')
        if self.predictor is None:
            raise BadRequest("no model loaded")
        return self.predictor.score(text).to_json()

    def rank(self, req):
        if not isinstance(req.get("from"), str) or not isinstance(req.get("to"), str):
            raise BadRequest('"from" and "to" must be ISO-8601 day strings')
        window = Window.parse(req["from"], req["to"])
        scorer = self.predictor.scalar if self.predictor is not None else None
        entries = rank_tokens(self.store, window, scorer)
        return [
            {
                "rank": i,
                "token": e.token,
                "M": e.count,
                "W": e.weight,
                "score_orig": e.score_orig,
                "score_adj": e.score_adj,
            }
            for i, e in enumerate(entries, 1)
        ]


def _handler_for(service):
    class Handler(BaseHTTPRequestHandler):
        server_version = "soc/0.1"

        def _send(self, status, payload):
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _dispatch(self, method):
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self._send(HTTPStatus.REQUEST_ENTITY_TOO_LARGE, {"error": "body too large"})
                return
            body = self.rfile.read(length) if length else b""
            status, payload = service.handle(method, self.path, body)
            self._send(status, payload)

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(service, host="127.0.0.1", port=8080):
    """Bind a threaded HTTP server; raises OSError if the port is taken."""
    server = ThreadingHTTPServer((host, port), _handler_for(service))
    server.daemon_threads = True
    return server
