"""HTTP API.

``POST /query?mode=sync|async`` takes AQL text. Statements run in order;
query results come back as newline-separated canonical ADM, other statements
as one status record each. ``X-Session-Id`` keeps ``use``/``set`` state
across requests; without it every request starts from a fresh session.

Errors: 400 with line, column and a caret excerpt for syntax and semantic
errors; 500 with a trace id (also written to the server log) for failures
during execution.
"""

from __future__ import annotations

import logging
import os
import threading
import traceback
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.concurrency import run_in_threadpool

from ..aql.parser import parse
from ..aql.resolve import SessionConfig
from ..errors import AdmSyntaxError, JobFailed, SemanticError
from .handles import FAILED, RUNNING, HandleTable

log = logging.getLogger("tinybdms.gateway")

SESSION_HEADER = "X-Session-Id"


def render(results, explain: bool = False) -> str:
    lines = []
    for r in results:
        if explain and r.plan:
            lines.append(r.plan)
        lines.extend(r.lines())
    return "".join(line + "\n" for line in lines)


def caret(text: str, line: int, column: int) -> str:
    rows = text.splitlines()
    if not 1 <= line <= len(rows):
        return ""
    return rows[line - 1] + "\n" + " " * max(column - 1, 0) + "^"


def error_payload(e: BaseException, text: str) -> tuple[int, dict]:
    if isinstance(e, (AdmSyntaxError, SemanticError)):
        kind = "syntax" if isinstance(e, AdmSyntaxError) else "semantic"
        body = {"error": kind, "message": str(e), "line": e.line, "column": e.column}
        if e.line:
            body["caret"] = caret(text, e.line, e.column)
        return 400, body
    trace_id = uuid.uuid4().hex[:16]
    log.error("request failed [trace %s]: %s\n%s", trace_id, e,
              "".join(traceback.format_exception(type(e), e, e.__traceback__)))
    body = {"error": "runtime", "type": type(e).__name__, "message": str(e), "trace_id": trace_id}
    if isinstance(e, JobFailed) and e.operator:
        body["operator"] = e.operator
    return 500, body


class Gateway:
    def __init__(self, instance):
        self.instance = instance
        ttl = instance.config.handle_ttl
        self.handles = HandleTable(os.path.join(instance.config.data_dir, "tmp", "results"), ttl)
        self._sessions: dict[str, SessionConfig] = {}
        self._lock = threading.Lock()

    def session(self, sid: str | None) -> SessionConfig:
        if not sid:
            return SessionConfig()
        with self._lock:
            return self._sessions.setdefault(sid, SessionConfig())

    def run(self, text: str, session: SessionConfig, explain: bool) -> str:
        return render(self.instance.execute(text, session, explain=explain), explain)

    def submit_async(self, text: str, session: SessionConfig, explain: bool):
        h = self.handles.create()

        def work():
            try:
                self.handles.succeed(h, self.run(text, session, explain))
            except Exception as e:  # reported through the handle
                self.handles.fail(h, error_payload(e, text)[1])

        threading.Thread(target=work, name=f"query-{h.id[:8]}", daemon=True).start()
        return h


def create_app(instance) -> FastAPI:
    gw = Gateway(instance)
    app = FastAPI(title="tinybdms", version="0.1.0")
    app.state.gateway = gw

    @app.post("/query")
    async def submit(request: Request, mode: str = "sync", explain: bool = False):
        text = (await request.body()).decode("utf-8")
        session = gw.session(request.headers.get(SESSION_HEADER))
        if mode == "async":
            try:
                parse(text)  # syntax errors are reported at once, not through a handle
            except AdmSyntaxError as e:
                code, body = error_payload(e, text)
                return JSONResponse(body, status_code=code)
            h = gw.submit_async(text, session, explain)
            return JSONResponse(h.describe(), status_code=202)
        if mode != "sync":
            return JSONResponse({"error": "request", "message": f"unknown mode {mode!r}"}, status_code=400)
        try:
            out = await run_in_threadpool(gw.run, text, session, explain)
        except Exception as e:  # mapped to an HTTP error
            code, body = error_payload(e, text)
            return JSONResponse(body, status_code=code)
        return PlainTextResponse(out)

    def lookup(hid: str):
        h = gw.handles.get(hid)
        if h is None:
            return None, JSONResponse({"error": "not found", "handle": hid}, status_code=404)
        return h, None

    @app.get("/query/{hid}/status")
    def status(hid: str):
        h, missing = lookup(hid)
        return missing or JSONResponse(h.describe())

    @app.get("/query/{hid}/result")
    def result(hid: str):
        h, missing = lookup(hid)
        if missing:
            return missing
        if h.status == RUNNING:
            return JSONResponse(h.describe(), status_code=202)
        if h.status == FAILED:
            return JSONResponse(h.describe(), status_code=500)
        return PlainTextResponse(gw.handles.read(h))

    @app.delete("/query/{hid}")
    def release(hid: str):
        if not gw.handles.release(hid):
            return JSONResponse({"error": "not found", "handle": hid}, status_code=404)
        return Response(status_code=204)

    return app
