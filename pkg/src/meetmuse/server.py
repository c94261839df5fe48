"""Network layer: HTTP admin endpoints plus the WebSocket session protocol.

Clients connect to ``/ws`` and must send ``join {token}`` first; after that
the socket carries the bidirectional session protocol (audio frames up,
music segments and metadata down).  Sessions on the virtual clock run to
completion the moment both roles have joined, which makes a full 20-minute
session testable over a real socket in well under a second; sessions on the
real clock run on a background thread at wall speed.
"""

from __future__ import annotations

import argparse
import asyncio
import threading
from dataclasses import dataclass, field

import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse

from . import protocol
from .config import ConfigError, ServiceConfig
from .clock import StageTimings
from .ingest import AudioFormatError, AudioFrame
from .protocol import (
    ErrorMessage,
    Join,
    Message,
    ProtocolError,
    SetVolume,
    SubmitSurvey,
    SurveyAck,
)
from .providers import providers_for
from .session import SessionHandle, SessionManager


@dataclass
class Connection:
    """One live websocket: its identity plus a queue of outbound wire frames."""

    session_id: str
    role: str
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    loop: asyncio.AbstractEventLoop | None = None

    def deliver(self, wire: str | bytes) -> None:
        """Enqueue from any thread; the pump task sends in order."""
        if self.loop is None:
            return
        self.loop.call_soon_threadsafe(self.queue.put_nowait, wire)

    async def pump(self, ws: WebSocket) -> None:
        while True:
            wire = await self.queue.get()
            if isinstance(wire, bytes):
                await ws.send_bytes(wire)
            else:
                await ws.send_text(wire)


class Hub:
    """Fan-out from session pushes to whichever sockets are connected."""

    def __init__(self):
        self._connections: dict[tuple[str, str], list[Connection]] = {}
        self._lock = threading.Lock()

    def register(self, connection: Connection) -> None:
        with self._lock:
            key = (connection.session_id, connection.role)
            self._connections.setdefault(key, []).append(connection)

    def unregister(self, connection: Connection) -> None:
        with self._lock:
            key = (connection.session_id, connection.role)
            if connection in self._connections.get(key, []):
                self._connections[key].remove(connection)

    def deliver(self, session_id: str, role: str, message: Message) -> None:
        wire = protocol.encode(message)
        with self._lock:
            targets = list(self._connections.get((session_id, role), []))
        for connection in targets:
            connection.deliver(wire)


def create_app(cfg: ServiceConfig | None = None, timings: StageTimings | None = None) -> FastAPI:
    cfg = (cfg or ServiceConfig()).validate()
    app = FastAPI(title="meetmuse")
    hub = Hub()
    manager = SessionManager(
        cfg,
        provider_factory=providers_for,
        push=hub.deliver,
        timings=timings,
    )
    app.state.manager = manager
    app.state.hub = hub

    @app.post("/sessions")
    async def create_session(body: dict | None = None):
        overrides = (body or {}).get("session")
        try:
            handle = manager.create_session(session_overrides=overrides)
        except (ConfigError, TypeError) as exc:
            violations = getattr(exc, "violations", [str(exc)])
            return JSONResponse({"error": "invalid config", "violations": violations}, status_code=400)
        return {
            "session_id": handle.session_id,
            "tokens": handle.tokens,
            "segment_count": len(handle.runner.schedule),
            "config": handle.runner.session.to_dict(),
        }

    @app.get("/sessions/{session_id}/log")
    async def get_log(session_id: str):
        text = manager.export_session_log(session_id)
        if text is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        return PlainTextResponse(text, media_type="application/jsonl")

    @app.get("/sessions/{session_id}/survey")
    async def get_survey(session_id: str):
        handle = manager.get(session_id)
        if handle is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        responses = handle.survey_store.latest() if handle.survey_store else {}
        return {"session_id": session_id, "responses": responses}

    @app.delete("/sessions/{session_id}")
    async def abort_session(session_id: str):
        handle = manager.get(session_id)
        if handle is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        if handle.runner.started and not handle.runner.ended:
            handle.runner.abort()
        return {"session_id": session_id, "state": handle.runner.state()}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        connection: Connection | None = None
        pump_task: asyncio.Task | None = None
        try:
            try:
                message = await _receive_message(ws)
            except ProtocolError as exc:
                await ws.send_text(protocol.encode(ErrorMessage("bad_message", str(exc))))
                await ws.close()
                return
            if not isinstance(message, Join):
                await ws.send_text(protocol.encode(ErrorMessage("join_required", "first message must be join")))
                await ws.close()
                return
            joined = manager.join(message.token)
            if joined is None:
                await ws.send_text(protocol.encode(ErrorMessage("invalid_token", "token not recognized")))
                await ws.close()
                return
            handle, role = joined
            connection = Connection(handle.session_id, role, loop=asyncio.get_running_loop())
            hub.register(connection)
            pump_task = asyncio.create_task(connection.pump(ws))
            _broadcast_state(hub, handle)
            _drive(handle)
            handle.runner.resume(role)

            while True:
                try:
                    message = await _receive_message(ws)
                except ProtocolError as exc:
                    connection.deliver(protocol.encode(ErrorMessage("bad_message", str(exc))))
                    continue
                await _dispatch(manager, handle, role, connection, message)
        except WebSocketDisconnect:
            pass
        finally:
            if connection is not None:
                hub.unregister(connection)
            if pump_task is not None:
                pump_task.cancel()

    return app


def _broadcast_state(hub: Hub, handle: SessionHandle) -> None:
    state = handle.runner.session_state_message(tuple(sorted(handle.joined)))
    for role in handle.tokens:
        hub.deliver(handle.session_id, role, state)


def _drive(handle: SessionHandle) -> None:
    """Advance a freshly started session: burst virtual, thread real."""
    runner = handle.runner
    if not runner.started or runner.ended:
        return
    if runner.virtual:
        runner.run()
        return
    if handle.run_thread is None:
        handle.run_thread = threading.Thread(target=runner.run, daemon=True)
        handle.run_thread.start()


async def _receive_message(ws: WebSocket) -> Message:
    raw = await ws.receive()
    if raw.get("type") == "websocket.disconnect":
        raise WebSocketDisconnect(raw.get("code") or 1000)
    data = raw.get("bytes") if raw.get("bytes") is not None else raw.get("text")
    return protocol.decode(data)


async def _dispatch(
    manager: SessionManager,
    handle: SessionHandle,
    role: str,
    connection: Connection,
    message: Message,
) -> None:
    runner = handle.runner
    if isinstance(message, protocol.AudioFrameMessage):
        try:
            runner.post_frame(
                AudioFrame(
                    participant_id=role,
                    session_time=message.t_s,
                    samples=message.pcm,
                    sample_rate=message.sample_rate,
                )
            )
        except AudioFormatError as exc:
            connection.deliver(protocol.encode(ErrorMessage("bad_audio", str(exc))))
    elif isinstance(message, SetVolume):
        runner.set_volume(role, message.volume)
    elif isinstance(message, SubmitSurvey):
        stored, violations = manager.submit_survey(handle.session_id, role, message.survey)
        ack = SurveyAck(status="stored" if stored else "rejected", violations=tuple(violations))
        connection.deliver(protocol.encode(ack))
    elif isinstance(message, Join):
        connection.deliver(protocol.encode(ErrorMessage("already_joined", "join accepted once per connection")))
    else:
        connection.deliver(
            protocol.encode(ErrorMessage("unexpected", f"server does not accept {message.type}"))
        )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="meetmuse-serve", description="Run the meeting-music session server."
    )
    parser.add_argument("--listen", default="127.0.0.1:8765", help="host:port to bind")
    parser.add_argument("--config", help="JSON service config file")
    parser.add_argument("--log-dir", help="override the session log directory")
    args = parser.parse_args(argv)

    cfg = ServiceConfig.from_file(args.config) if args.config else ServiceConfig()
    if args.log_dir:
        cfg = type(cfg).from_dict({**cfg.to_dict(), "log_dir": args.log_dir})
    host, _, port = args.listen.rpartition(":")
    app = create_app(cfg)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
