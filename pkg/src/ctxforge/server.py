"""JSON-over-HTTP front end for an :class:`~ctxforge.hybrid.Engine`."""

from __future__ import annotations

import json
import logging
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .cache.build import ChangeEvent, StaleChangeError
from .corpus import CorpusError
from .hybrid import Engine

log = logging.getLogger(__name__)

MAX_BODY = 16 * 1024 * 1024


class BadRequest(ValueError):
    pass


def query_response(engine: Engine, body: object) -> dict:
    if not isinstance(body, dict) or not isinstance(body.get("text"), str):
        raise BadRequest('expected a JSON object with a string "text" field')
    qid = body.get("query_id")
    if qid is not None and not isinstance(qid, str):
        raise BadRequest('"query_id" must be a string')
    ctx, metrics = engine.answer(body["text"], qid)
    return {"context": ctx.to_dict(), "metrics": metrics}


def update_response(engine: Engine, body: object) -> dict:
    try:
        event = ChangeEvent.from_record(body)
        changed = engine.update(event)
    except (CorpusError, StaleChangeError) as exc:
        raise BadRequest(str(exc)) from None
    return {"op": event.op.value, "doc_id": event.doc_id, "recompute_log": changed}


class Handler(BaseHTTPRequestHandler):
    engine: Engine  # set on the bound subclass

    def _send(self, status: int, payload: dict) -> None:
        data = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> object:
        try:
            n = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            raise BadRequest("invalid Content-Length") from None
        if n < 0 or n > MAX_BODY:
            raise BadRequest("request body too large")
        raw = self.rfile.read(n)
        try:
            return json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BadRequest(f"malformed JSON body: {exc}") from None

    def do_GET(self) -> None:
        if self.path == "/stats":
            self._send(200, self.engine.stats())
        else:
            self._send(404, {"error": f"no such endpoint: GET {self.path}"})

    def do_POST(self) -> None:
        routes = {"/query": query_response, "/update": update_response}
        route = routes.get(self.path)
        if route is None:
            self._send(404, {"error": f"no such endpoint: POST {self.path}"})
            return
        try:
            self._send(200, route(self.engine, self._body()))
        except BadRequest as exc:
            self._send(400, {"error": str(exc)})
        except Exception as exc:  # report, keep serving
            log.exception("request failed")
            self._send(500, {"error": str(exc)})

    def log_message(self, fmt: str, *args) -> None:
        log.info("%s " + fmt, self.address_string(), *args)


def make_server(engine: Engine, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (Handler,), {"engine": engine})
    return ThreadingHTTPServer((host, port), handler)
