"""Interactive sculpting sessions and the WebSocket server around them.

A session owns the live network, the sample chain, a bounded ring of
undo snapshots, and the current brush and camera.  Strokes run the edit
fine-tuning loop while streaming preview frames at a fixed iteration
cadence; parameters only change inside a stroke or an undo.  The server
speaks the wire protocol from one connection per session, serializing
message handling and bounding the stroke queue.
"""

from __future__ import annotations

import asyncio
import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import defaults, protocol
from .brush import Brush, get_template, make_frame
from .mlp import SirenNetwork, load_checkpoint
from .render import Camera, encode_png, pick, render_frame
from .sampler import SamplerState, seed_samples, resample_step
from .training import EditJob, LossConfig, finetune_edit

log = logging.getLogger(__name__)

_session_ids = itertools.count(1)


@dataclass
class ServiceConfig:
    sampler_count: int = 20000
    undo_depth: int = 16
    stroke_queue_depth: int = 4
    stroke_iterations: int = 200
    frame_every: int = 25
    preview_size: int = 192
    factor: int = 10
    model_batch: int = 5000
    free_batch: int = 5000
    chain_refresh_steps: int = 3
    seed: int = 0


def default_camera(width: int = 384, height: int = 384) -> Camera:
    return Camera(
        position=np.array([1.7, 1.2, 0.9]),
        target=np.zeros(3),
        width=width,
        height=height,
    )


class SessionError(RuntimeError):
    def __init__(self, code: str, text: str):
        super().__init__(text)
        self.code = code
        self.text = text


class Session:
    """One sculpting session: network, chain, undo ring, brush, camera."""

    def __init__(self, net: SirenNetwork, config: ServiceConfig | None = None,
                 loss_config: LossConfig | None = None):
        self.config = config or ServiceConfig()
        self.loss_config = loss_config or LossConfig()
        self.id = next(_session_ids)
        self.net = net
        try:
            self.sampler_state: SamplerState = seed_samples(
                net, self.config.sampler_count, seed=self.config.seed
            )
        except ValueError as exc:
            raise SessionError("load_failed", f"surface not found: {exc}") from exc
        # Rendering always reads this iteration-boundary snapshot, never
        # the live network a stroke is mutating.
        self.display_net = net.clone()
        self.undo_ring: list[SirenNetwork] = []
        self.brush: Brush | None = None
        self.camera = default_camera()
        self.stroke_counter = 0

    # -- queries ------------------------------------------------------

    def render_current(self, width: int | None = None, height: int | None = None) -> np.ndarray:
        cam = self.camera
        if width or height:
            cam = replace(cam, width=width or cam.width, height=height or cam.height)
        return render_frame(self.display_net, cam)

    # -- mutations ----------------------------------------------------

    def set_brush(self, template: str, radius: float, intensity: float) -> None:
        self.brush = Brush(get_template(template), radius, intensity)

    def set_camera(self, camera: Camera) -> None:
        self.camera = camera

    def load_model(self, checkpoint_path: str) -> None:
        try:
            net = load_checkpoint(checkpoint_path)
        except (FileNotFoundError, ValueError) as exc:
            raise SessionError("load_failed", str(exc)) from exc
        self.net = net
        self.sampler_state = seed_samples(net, self.config.sampler_count, seed=self.config.seed)
        self.display_net = net.clone()
        self.undo_ring.clear()

    def apply_stroke(self, pixel: tuple[int, int], on_frame=None, on_status=None) -> None:
        """Pick, snapshot for undo, fine-tune, stream previews.

        ``on_frame(image, final)`` and ``on_status(iteration, breakdown)``
        fire from inside the loop at the configured cadence.
        """
        if self.brush is None:
            raise SessionError("no_brush", "set a brush before stroking")
        x, y = pixel
        if not (0 <= x < self.camera.width and 0 <= y < self.camera.height):
            raise SessionError("out_of_bounds", f"pixel {pixel} outside the frame")
        point = pick(self.display_net, self.camera, (x, y))
        if point is None:
            raise SessionError("no_surface_under_cursor", "stroke ray missed the surface")
        frame = make_frame(self.net, point)

        snapshot = self.net.clone()
        self.undo_ring.append(snapshot)
        if len(self.undo_ring) > self.config.undo_depth:
            self.undo_ring.pop(0)

        cfg = self.config
        job = EditJob(
            brush=self.brush,
            frame=frame,
            iterations=cfg.stroke_iterations,
            factor=cfg.factor,
            model_batch=cfg.model_batch,
            free_batch=cfg.free_batch,
        )
        self.stroke_counter += 1
        stroke_seed = np.random.default_rng([cfg.seed, self.stroke_counter])

        def on_iteration(it, net, breakdown):
            boundary = (it + 1) % cfg.frame_every == 0
            if boundary or it + 1 == job.iterations:
                self.display_net = net.clone()
            if boundary and it + 1 < job.iterations:
                if on_status is not None:
                    on_status(it + 1, breakdown)
                if on_frame is not None:
                    on_frame(self.render_current(cfg.preview_size, cfg.preview_size), False)

        try:
            finetune_edit(
                self.net, job, self.sampler_state, self.loss_config,
                seed=stroke_seed, on_iteration=on_iteration,
            )
        except ValueError as exc:
            # Restore: a failed stroke must leave the session unchanged.
            self.net = self.undo_ring.pop()
            self.display_net = self.net.clone()
            raise SessionError("internal", f"stroke failed: {exc}") from exc
        self.display_net = self.net.clone()
        # Walk the chain onto the deformed surface.
        for _ in range(cfg.chain_refresh_steps):
            self.sampler_state = resample_step(self.net, self.sampler_state)
        if on_frame is not None:
            on_frame(self.render_current(), True)

    def undo(self) -> None:
        if not self.undo_ring:
            raise SessionError("nothing_to_undo", "no snapshots to restore")
        self.net = self.undo_ring.pop()
        self.display_net = self.net.clone()
        self.sampler_state = seed_samples(
            self.net, self.config.sampler_count, seed=self.config.seed
        )


def start_session(checkpoint_path: str, config: ServiceConfig | None = None) -> Session:
    try:
        net = load_checkpoint(checkpoint_path)
    except (FileNotFoundError, ValueError) as exc:
        raise SessionError("load_failed", str(exc)) from exc
    return Session(net, config)


# ---------------------------------------------------------------------------
# WebSocket server


def create_app(checkpoint_path: str, config: ServiceConfig | None = None):
    """FastAPI app exposing one sculpting session per connection at /ws."""
    config = config or ServiceConfig()
    app = FastAPI(title="sdfsculpt")

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        loop = asyncio.get_running_loop()
        outbox: asyncio.Queue = asyncio.Queue()

        def send_message(msg) -> None:
            outbox.put_nowait(("text", protocol.serialize_message(msg)))

        def send_frame(request_id: int, image: np.ndarray) -> None:
            outbox.put_nowait(("bytes", protocol.encode_frame(request_id, encode_png(image))))

        try:
            session = start_session(checkpoint_path, config)
        except SessionError as exc:
            await websocket.send_text(
                protocol.serialize_message(protocol.Error(code=exc.code, text=exc.text))
            )
            await websocket.close()
            return
        send_message(protocol.Status(phase="connected", detail=f"session {session.id}"))

        actions: asyncio.Queue = asyncio.Queue()
        pending_strokes = 0

        async def sender():
            while True:
                kind, payload = await outbox.get()
                if kind == "text":
                    await websocket.send_text(payload)
                else:
                    await websocket.send_bytes(payload)

        async def worker():
            nonlocal pending_strokes
            while True:
                msg = await actions.get()
                try:
                    if isinstance(msg, protocol.Stroke):
                        pending_strokes -= 1
                        await handle_stroke(msg)
                    elif isinstance(msg, protocol.SetBrush):
                        session.set_brush(msg.template, msg.radius, msg.intensity)
                        send_message(protocol.Status(phase="ack", detail="brush"))
                    elif isinstance(msg, protocol.SetCamera):
                        session.set_camera(
                            Camera(
                                position=np.array(msg.position),
                                target=np.array(msg.target),
                                up=np.array(msg.up),
                                fov_y=msg.fov_y,
                                width=msg.width,
                                height=msg.height,
                            )
                        )
                        send_message(protocol.Status(phase="ack", detail="camera"))
                    elif isinstance(msg, protocol.LoadModel):
                        await asyncio.to_thread(session.load_model, msg.checkpoint_path)
                        send_message(protocol.Status(phase="ack", detail="model"))
                    elif isinstance(msg, protocol.Undo):
                        await asyncio.to_thread(session.undo)
                        send_message(protocol.Status(phase="undone"))
                    elif isinstance(msg, protocol.RequestFrame):
                        image = await asyncio.to_thread(session.render_current)
                        send_frame(msg.request_id, image)
                except SessionError as exc:
                    send_message(protocol.Error(code=exc.code, text=exc.text))
                except ValueError as exc:
                    send_message(protocol.Error(code="internal", text=str(exc)))

        async def handle_stroke(msg: protocol.Stroke):
            def on_frame(image, final):
                loop.call_soon_threadsafe(send_frame, msg.request_id, image)

            def on_status(iteration, breakdown):
                loop.call_soon_threadsafe(
                    send_message,
                    protocol.Status(
                        phase="training",
                        iteration=iteration,
                        loss=protocol.LossRecord(**breakdown.as_dict()),
                        request_id=msg.request_id,
                    ),
                )

            await asyncio.to_thread(session.apply_stroke, (msg.x, msg.y), on_frame, on_status)
            send_message(protocol.Status(phase="stroke_complete", request_id=msg.request_id))

        sender_task = asyncio.create_task(sender())
        worker_task = asyncio.create_task(worker())
        try:
            while True:
                raw = await websocket.receive_text()
                try:
                    msg = protocol.parse_client_message(raw)
                except protocol.ProtocolError as exc:
                    send_message(protocol.Error(code="bad_message", text=str(exc)))
                    continue
                if isinstance(msg, protocol.Stroke):
                    if pending_strokes >= config.stroke_queue_depth:
                        send_message(protocol.Error(code="busy", text="stroke queue full"))
                        continue
                    pending_strokes += 1
                actions.put_nowait(msg)
        except WebSocketDisconnect:
            pass
        finally:
            sender_task.cancel()
            worker_task.cancel()

    return app


def serve(checkpoint_path: str, host: str = "127.0.0.1", port: int = 8765,
          config: ServiceConfig | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(checkpoint_path, config), host=host, port=port, log_level="warning")
