"""HTTP control plane + WebSocket data plane.

Control endpoints (JSON in/out; 409 with the current phase on an illegal
transition):

    GET  /api/status
    POST /api/session/start   {subject_id, day_id, n_blocks?, n_trials?, wearing_shift?}
    POST /api/session/stop
    POST /api/params          {window_ms?, step_ms?, model?}
    POST /api/online/start    {n_trials?, seed?}
    POST /api/reaction/start  {n}
    POST /api/reaction/submit {latencies_s: [..]}

Stream endpoint: WS /ws/stream delivers JSON messages, each with a "type"
field:

    signal        decimated 50 Hz display frames {t_ms, emg[8], accel[3]};
                  carries "display_drops" after any backpressure drops
    prompt        {mode_id, text, sound, block?, trial, speed?, progress}
    progress      {value (exactly 1.0 at each trial end), block, trial}
    prediction    {label, t_s, latency_s}
    trial_result  {cued_mode, predicted_mode, t0_s, t3_s, delta_t_ms, correct, timed_out}
    reaction_test / reaction_result
    event         {name: recording_saved | online_done, ...}
    status        full manager status

Control-plane messages are never dropped; display frames may be.
"""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from starlette.concurrency import run_in_threadpool

from ..errors import PhaseConflictError, SemglabError
from .manager import ServiceConfig, SessionManager


def create_app(config: ServiceConfig | None = None, manager: SessionManager | None = None) -> FastAPI:
    manager = manager or SessionManager(config)

    @asynccontextmanager
    async def lifespan(_app):
        yield
        manager.shutdown()

    app = FastAPI(title="semglab acquisition service", lifespan=lifespan)
    app.state.manager = manager

    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(PhaseConflictError)
    async def phase_conflict(_, exc: PhaseConflictError):
        return JSONResponse(status_code=409, content={"error": str(exc), "phase": exc.phase})

    @app.exception_handler(SemglabError)
    async def domain_error(_, exc: SemglabError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/status")
    def status():
        return manager.status()

    @app.post("/api/session/start")
    def session_start(body: dict):
        return manager.start_session(
            subject_id=body.get("subject_id", 1),
            day_id=body.get("day_id", 1),
            n_blocks=body.get("n_blocks", 12),
            n_trials=body.get("n_trials", 12),
            wearing_shift=body.get("wearing_shift", 0),
        )

    @app.post("/api/session/stop")
    def session_stop():
        return manager.stop_session()

    @app.post("/api/params")
    def set_params(body: dict):
        return manager.set_params(
            window_ms=body.get("window_ms"),
            step_ms=body.get("step_ms"),
            model=body.get("model"),
        )

    @app.post("/api/online/start")
    def online_start(body: dict | None = None):
        body = body or {}
        return manager.start_online(n_trials=body.get("n_trials"), seed=body.get("seed", 0))

    @app.post("/api/reaction/start")
    def reaction_start(body: dict):
        return manager.reaction_start(n=body["n"])

    @app.post("/api/reaction/submit")
    def reaction_submit(body: dict):
        return manager.reaction_submit(body["latencies_s"])

    @app.websocket("/ws/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        sid, sub = manager.hub.subscribe()
        try:
            while True:
                msg = await run_in_threadpool(sub.get, 0.25)
                if msg is None:
                    continue
                await ws.send_json(msg)
        except WebSocketDisconnect:
            pass
        finally:
            manager.hub.unsubscribe(sid)

    frontend = getattr(manager.config, "frontend_dir", None)
    if frontend:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend, html=True), name="frontend")

    return app


def serve(config: ServiceConfig | None = None) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    config = config or ServiceConfig()
    uvicorn.run(create_app(config), host="127.0.0.1", port=config.port)
