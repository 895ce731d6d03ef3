"""WebSocket control channel: operator commands in, acknowledgements and
event-monitor frames out.

Protocol (JSON text frames):
    request   {"id": any, "cmd": str, "args": {...}}
    reply     {"id": any, "ok": bool, "detail": {...} | "error": str}
    broadcast {"type": "monitor", "frames": [{"t", "direction", "event"}, ...]}
    broadcast {"type": "status", ...}   (on connect and after each command)

Monitor frames are coalesced: at most one broadcast flush per 1/30 s,
carrying every frame buffered since the previous flush.
"""

from __future__ import annotations

import asyncio
import json
import threading
from typing import List, Optional, Set

import websockets
from websockets.asyncio.server import ServerConnection, serve

from .cues import CommandError, parse_command
from .engine import LiveEngine
from .pipeline import PipelineError

MONITOR_FLUSH_HZ = 30
MONITOR_BUFFER_LIMIT = 4096


class ControlServer:
    """Runs an asyncio websocket server on its own thread."""

    def __init__(self, live: LiveEngine, host: str = "127.0.0.1", port: int = 9001):
        self.live = live
        self.host = host
        self.port = port
        self._clients: Set[ServerConnection] = set()
        self._monitor_buf: List[dict] = []
        self._monitor_lock = threading.Lock()
        self._loop: Optional[asyncio.AbstractEventLoop] = None
        self._thread: Optional[threading.Thread] = None
        self._started = threading.Event()
        self._stop: Optional[asyncio.Future] = None
        self._startup_error: Optional[BaseException] = None

    # Called from the engine thread for every in/out event.
    def monitor(self, t: int, direction: str, event: dict) -> None:
        with self._monitor_lock:
            if len(self._monitor_buf) < MONITOR_BUFFER_LIMIT:
                self._monitor_buf.append({"t": t, "direction": direction, "event": event})

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="control-server", daemon=True)
        self._thread.start()
        self._started.wait(timeout=5)
        if self._startup_error is not None:
            raise self._startup_error

    def stop(self) -> None:
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set_result, None)
        if self._thread is not None:
            self._thread.join(timeout=5)

    def _run(self) -> None:
        asyncio.run(self._main())

    async def _main(self) -> None:
        self._loop = asyncio.get_running_loop()
        self._stop = self._loop.create_future()
        try:
            async with serve(self._handle, self.host, self.port) as server:
                self.port = server.sockets[0].getsockname()[1]
                self._started.set()
                flusher = asyncio.ensure_future(self._flush_monitor())
                await self._stop
                flusher.cancel()
        except OSError as exc:
            self._startup_error = exc
            self._started.set()

    async def _handle(self, ws: ServerConnection) -> None:
        self._clients.add(ws)
        try:
            await ws.send(json.dumps({"type": "status", **self.live.engine.status()}))
            async for raw in ws:
                await self._handle_request(ws, raw)
        except websockets.ConnectionClosed:
            pass
        finally:
            self._clients.discard(ws)

    async def _handle_request(self, ws: ServerConnection, raw) -> None:
        try:
            obj = json.loads(raw)
            req_id = obj.get("id")
            cmd = parse_command(obj)
        except (json.JSONDecodeError, CommandError) as exc:
            await ws.send(json.dumps({"id": obj.get("id") if isinstance(obj, dict) else None,
                                      "ok": False, "error": str(exc)}))
            return
        try:
            detail = await asyncio.get_running_loop().run_in_executor(
                None, self.live.submit_command, cmd)
            await ws.send(json.dumps({"id": req_id, "ok": True, "detail": detail}))
            await self._broadcast(json.dumps({"type": "status", **self.live.engine.status()}))
        except (CommandError, PipelineError) as exc:
            await ws.send(json.dumps({"id": req_id, "ok": False, "error": str(exc)}))

    async def _flush_monitor(self) -> None:
        while True:
            await asyncio.sleep(1 / MONITOR_FLUSH_HZ)
            with self._monitor_lock:
                frames, self._monitor_buf = self._monitor_buf, []
            if frames and self._clients:
                await self._broadcast(json.dumps({"type": "monitor", "frames": frames}))

    async def _broadcast(self, payload: str) -> None:
        for ws in list(self._clients):
            try:
                await ws.send(payload)
            except websockets.ConnectionClosed:
                self._clients.discard(ws)
