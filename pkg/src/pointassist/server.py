"""Session service: WebSocket state streaming plus static cockpit assets.

One session per connection (reconnecting with the same session id resumes
a paused session). The sim task advances the session on a fixed wall-clock
cadence; a separate sender task ships the latest state at up to the frame
rate. A stalled client therefore skips state frames, but events accumulate
in the session buffer and ride along with the next delivered frame.
"""

from __future__ import annotations

import asyncio
import json
import logging
from pathlib import Path

from fastapi import FastAPI, Query, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles

from .config import EngineConfig
from .scene import SceneDescription
from .session import (CLOSE_BAD_JSON, CLOSE_BUSY, CLOSE_TOO_LARGE,
                      MAX_MESSAGE_BYTES, ProtocolError, Session)

log = logging.getLogger(__name__)

FRAME_HZ = 30.0
STEPS_PER_FRAME = 2  # 60 Hz sim, 30 Hz wire


def create_app(description: SceneDescription, config: EngineConfig | None = None,
               mode: str = "none", frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="pointassist session service")
    sessions: dict[str, Session] = {}
    active: set[str] = set()

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "sessions": sorted(sessions)}

    @app.websocket("/session")
    async def session_socket(ws: WebSocket, session: str = Query("default")):
        await ws.accept()
        if session in active:
            await ws.close(code=CLOSE_BUSY, reason="session already connected")
            return
        active.add(session)
        sess = sessions.setdefault(session, Session(description, config, mode=mode))
        inbox: asyncio.Queue = asyncio.Queue()
        fresh = asyncio.Event()
        stop = asyncio.Event()

        async def receiver():
            try:
                while True:
                    text = await ws.receive_text()
                    if len(text.encode()) > MAX_MESSAGE_BYTES:
                        raise ProtocolError(CLOSE_TOO_LARGE, "message too large")
                    try:
                        msg = json.loads(text)
                    except json.JSONDecodeError as e:
                        raise ProtocolError(CLOSE_BAD_JSON, f"invalid JSON: {e.msg}") from None
                    inbox.put_nowait(msg)
            except WebSocketDisconnect:
                pass
            finally:
                stop.set()

        async def pacer():
            loop = asyncio.get_running_loop()
            period = 1.0 / FRAME_HZ
            next_tick = loop.time() + period
            while not stop.is_set():
                await asyncio.sleep(max(0.0, next_tick - loop.time()))
                next_tick = max(next_tick + period, loop.time())
                while not inbox.empty():
                    sess.handle_message(inbox.get_nowait())
                sess.step(STEPS_PER_FRAME)
                fresh.set()

        async def sender():
            while not stop.is_set():
                await fresh.wait()
                fresh.clear()
                await ws.send_text(json.dumps(sess.state_message()))

        tasks = [asyncio.create_task(t()) for t in (receiver, pacer, sender)]
        code = 1000
        reason = ""
        try:
            done, _ = await asyncio.wait(tasks, return_when=asyncio.FIRST_COMPLETED)
            for t in done:
                exc = t.exception()
                if isinstance(exc, ProtocolError):
                    code, reason = exc.code, exc.reason
                elif exc is not None:
                    raise exc
        finally:
            active.discard(session)
            stop.set()
            for t in tasks:
                t.cancel()
            try:
                await ws.close(code=code, reason=reason)
            except RuntimeError:
                pass  # already closed by the peer

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="cockpit")
    else:
        @app.get("/")
        def index():
            return HTMLResponse(
                "<h1>pointassist session service</h1>"
                "<p>No cockpit build found. Connect a client to "
                "<code>ws://host:port/session</code>.</p>")

    return app


def run_server(description: SceneDescription, config: EngineConfig | None = None,
               mode: str = "none", host: str = "127.0.0.1", port: int = 8750,
               frontend_dir: str | None = None) -> None:
    import uvicorn

    app = create_app(description, config, mode=mode, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
