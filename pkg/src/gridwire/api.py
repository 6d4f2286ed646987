"""HTTP gateway over the master: tag reads, session health, controls, logs,
and a server-sent-events stream of tag deltas for the operator console."""

from __future__ import annotations

import json
import logging
import queue
import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import RedirectResponse, StreamingResponse
from pydantic import BaseModel

from .errors import GridwireError, MapError
from .master.master import Master
from .outstation.cmdlog import CommandLog, read_jsonl

log = logging.getLogger(__name__)

STREAM_QUEUE_LIMIT = 256


class ApiControlRequest(BaseModel):
    tag: str
    action: Literal["latch_on", "latch_off", "analog"]
    value: float | None = None
    mode: Literal["direct", "select_operate"] = "direct"


def create_app(
    master: Master,
    command_log: CommandLog | None = None,
    command_log_path: str | Path | None = None,
    console_dir: str | Path | None = None,
) -> FastAPI:
    """``command_log`` shares an in-process outstation's log; otherwise
    ``command_log_path`` may point at its JSON-lines file."""
    app = FastAPI(title="gridwire operator API")

    @app.get("/api/sessions")
    def sessions():
        out = []
        for name, session in master.sessions.items():
            health = session.health
            out.append(
                {
                    "name": name,
                    "outstation": session.config.server_dnp_address,
                    "server": f"{session.config.server_ip}:{session.config.server_port}",
                    "offline": health.offline,
                    "message_sent_count": health.message_sent_count,
                    "message_received_count": health.message_received_count,
                    "message_success_count": health.message_success_count,
                    "message_failure_count": health.message_failure_count,
                }
            )
        return out

    @app.get("/api/tags")
    def tags(
        session: str | None = Query(default=None),
        prefix: str = Query(default=""),
        tag: str | None = Query(default=None),
    ):
        names = [session] if session is not None else list(master.sessions)
        out = []
        for name in names:
            if name not in master.sessions:
                raise HTTPException(status_code=404, detail=f"unknown session '{name}'")
            for view in master.tag_views(name, prefix=prefix):
                if tag is None or view.name == tag:
                    out.append(view.to_json())
        return out

    @app.post("/api/control")
    def control(request: ApiControlRequest):
        if request.action == "analog" and request.value is None:
            raise HTTPException(status_code=400, detail="analog control requires a value")
        if request.action != "analog" and request.value is not None:
            raise HTTPException(status_code=400, detail="latch controls carry no value")
        try:
            session, _ = master.find_tag(request.tag)
        except MapError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        if session.health.offline:
            raise HTTPException(
                status_code=409, detail=f"session {session.config.name} is offline"
            )
        try:
            status = master.operate_tag(
                request.tag,
                request.action,
                value=request.value,
                select_operate=request.mode == "select_operate",
            )
        except MapError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except GridwireError as exc:
            raise HTTPException(status_code=502, detail=f"wire failure: {exc}") from exc
        return {"status": status.name, "detail": f"{request.action} on {request.tag}"}

    @app.get("/api/logs")
    def logs(offset: int = 0, limit: int = 50):
        if command_log is not None:
            commands = command_log.entries(offset=offset, limit=limit)
        elif command_log_path and Path(command_log_path).exists():
            entries = list(reversed(read_jsonl(command_log_path)))
            commands = entries[offset : offset + limit]
        else:
            commands = []
        session_events = list(master.events)[-limit:][::-1]
        return {
            "commands": [vars(entry) for entry in commands],
            "session_events": session_events,
        }

    @app.get("/api/stream")
    def stream(
        limit: int | None = Query(default=None, description="close after N delta events"),
        idle_s: float | None = Query(default=None, description="close after quiet seconds"),
    ):
        deltas: queue.Queue = queue.Queue(maxsize=STREAM_QUEUE_LIMIT)
        dropped = threading.Event()

        def listener(views):
            try:
                deltas.put_nowait(views)
            except queue.Full:
                log.warning("slow stream subscriber dropped")
                dropped.set()
                master.remove_listener(listener)

        master.add_listener(listener)

        def generate():
            yield ": connected\n\n"
            sent = 0
            try:
                while not dropped.is_set():
                    try:
                        views = deltas.get(timeout=idle_s if idle_s is not None else 5.0)
                    except queue.Empty:
                        if idle_s is not None:
                            return
                        yield ": keepalive\n\n"
                        continue
                    payload = json.dumps([v.to_json() for v in views])
                    yield f"data: {payload}\n\n"
                    sent += 1
                    if limit is not None and sent >= limit:
                        return
            finally:
                master.remove_listener(listener)

        return StreamingResponse(generate(), media_type="text/event-stream")

    console = Path(console_dir) if console_dir else None
    if console and console.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(console), html=True), name="console")

        @app.get("/")
        def root():
            return RedirectResponse(url="/ui/")

    else:

        @app.get("/")
        def root():
            return {"service": "gridwire operator API", "endpoints": [
                "/api/sessions", "/api/tags", "/api/control", "/api/logs", "/api/stream",
            ]}

    return app
