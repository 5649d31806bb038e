"""Live teleoperation service: state streaming plus command ingestion.

The simulation runs in its own thread, paced against the wall clock, and
never blocks on the network: commands arrive through a newest-wins
mailbox, outgoing frames go into bounded per-client queues that drop
their oldest entry when a client falls behind.
"""

from __future__ import annotations

import asyncio
import contextlib
import logging
import threading
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .engine import CommandMailbox, HumanCommand, LiveSource, SimConfig, run
from .errors import ProtocolError
from .wire import decode_command, encode_hello, encode_state, state_frame_from_record

log = logging.getLogger("swarmcover.service")

CLIENT_QUEUE_SIZE = 16


class Broadcaster:
    """Fans frames out to websocket clients; all mutations happen on the
    event loop, publishes hop over from the sim thread."""

    def __init__(self):
        self.loop: asyncio.AbstractEventLoop | None = None
        self._clients: dict[int, asyncio.Queue] = {}
        self._next_id = 0

    def bind(self, loop: asyncio.AbstractEventLoop) -> None:
        self.loop = loop

    def register(self) -> tuple[int, asyncio.Queue]:
        cid = self._next_id
        self._next_id += 1
        q: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_QUEUE_SIZE)
        self._clients[cid] = q
        return cid, q

    def unregister(self, cid: int) -> None:
        self._clients.pop(cid, None)

    def publish_threadsafe(self, text: str) -> None:
        if self.loop is None or self.loop.is_closed():
            return
        try:
            self.loop.call_soon_threadsafe(self._publish, text)
        except RuntimeError:
            pass  # loop shut down while the sim thread was publishing

    def _publish(self, text: str) -> None:
        for q in self._clients.values():
            if q.full():
                with contextlib.suppress(asyncio.QueueEmpty):
                    q.get_nowait()  # drop-oldest
            q.put_nowait(text)


class SimRunner(threading.Thread):
    """Owns the engine loop: real-time pacing, decimated frame publishing."""

    def __init__(self, config: SimConfig, broadcaster: Broadcaster, frames_hz: float = 10.0, realtime: bool = True):
        super().__init__(daemon=True, name="swarmcover-sim")
        self.config = config
        self.broadcaster = broadcaster
        self.mailbox = CommandMailbox()
        self.frames_hz = frames_hz
        self.realtime = realtime
        self.stop_event = threading.Event()
        self.steps_done = 0
        self.sim_time = 0.0
        self.overruns = 0
        self.finished = False
        self.telemetry = None

    def run(self) -> None:
        cfg = self.config
        stride = max(1, round(1.0 / (self.frames_hz * cfg.dt)))
        anchor = time.monotonic()

        def on_step(rec, grid, swarm):
            nonlocal anchor
            self.steps_done = rec.step + 1
            self.sim_time = rec.t + cfg.dt
            if rec.step % stride == 0:
                self.broadcaster.publish_threadsafe(encode_state(state_frame_from_record(rec, grid)))
            if self.realtime:
                deadline = anchor + (rec.step + 1) * cfg.dt
                now = time.monotonic()
                if now < deadline:
                    time.sleep(deadline - now)
                elif now > deadline + cfg.dt:
                    # fell behind: log, skip pacing, and re-anchor the clock
                    self.overruns += 1
                    log.debug("step %d overran its deadline by %.3fs", rec.step, now - deadline)
                    anchor = now - (rec.step + 1) * cfg.dt

        source = LiveSource(self.mailbox, cfg.command.staleness_timeout)
        self.telemetry = run(cfg, command_source=source, on_step=on_step, stop=self.stop_event.is_set)
        self.finished = True

    def stop(self) -> None:
        self.stop_event.set()


def create_app(
    config: SimConfig,
    frames_hz: float = 10.0,
    realtime: bool = True,
    static_dir=None,
) -> FastAPI:
    """Build the service around one simulation run.

    The sim thread starts with the app and stops with it; TestClient's
    context manager drives the same lifecycle in-process.
    """
    broadcaster = Broadcaster()
    runner = SimRunner(config, broadcaster, frames_hz=frames_hz, realtime=realtime)

    async def lifespan(app: FastAPI):
        broadcaster.bind(asyncio.get_running_loop())
        runner.start()
        yield
        runner.stop()
        runner.join(timeout=5.0)

    app = FastAPI(lifespan=lifespan)
    app.state.runner = runner
    app.state.broadcaster = broadcaster

    @app.get("/health")
    async def health():
        return {
            "status": "done" if runner.finished else "running",
            "t": runner.sim_time,
            "steps": runner.steps_done,
            "n": config.n,
            "dt": config.dt,
            "stealth_mode": config.stealth_mode,
            "overruns": runner.overruns,
        }

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        cid, queue = broadcaster.register()
        await ws.send_text(encode_hello(config))

        async def sender():
            while True:
                await ws.send_text(await queue.get())

        async def receiver():
            while True:
                text = await ws.receive_text()
                frame = decode_command(text)  # ProtocolError drops this client
                runner.mailbox.put(HumanCommand(v=frame.v, w=frame.w, engaged=frame.engaged))

        tasks = [asyncio.create_task(sender()), asyncio.create_task(receiver())]
        try:
            done, pending = await asyncio.wait(tasks, return_when=asyncio.FIRST_EXCEPTION)
            for task in done:
                exc = task.exception()
                if isinstance(exc, ProtocolError):
                    log.warning("client %d dropped: %s", cid, exc)
                    await ws.close(code=1002)
                elif exc is not None and not isinstance(exc, WebSocketDisconnect):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
                with contextlib.suppress(asyncio.CancelledError, Exception):
                    await task
            broadcaster.unregister(cid)

    if static_dir is not None:
        import os

        if os.path.isdir(static_dir):
            app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
        else:
            log.warning("static dir %s not found; UI not served", static_dir)

    return app


def serve(config: SimConfig, port: int = 8000, host: str = "127.0.0.1", static_dir=None, frames_hz: float = 10.0) -> None:
    """Run the service until interrupted (or the scenario duration ends)."""
    import uvicorn

    app = create_app(config, frames_hz=frames_hz, realtime=True, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
