"""HTTP inference service for interactive dual-resolution segmentation.

Sessions hold an in-memory pyramid; prediction is stateless with respect
to prompt history (the history is recorded but never read back into the
model), so identical requests always return identical masks. Masks travel
run-length encoded in the documented row-major background-first format.
"""

from __future__ import annotations

import base64
import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .model import DuoSegModel
from .prompts import parse_prompt_json
from .pyramid import PyramidImage, build_pyramid, extract_pair
from .rle import rle_encode
from .synth import SynthConfig, synth_dataset

__all__ = ["create_app", "TILE_SIZE"]

TILE_SIZE = 256


@dataclass
class Session:
    id: str
    pyramid: PyramidImage
    ckpt_id: str
    prompt_history: list[dict] = field(default_factory=list)


_SYNTH_DEFAULTS = SynthConfig(n_images=1)


class SyntheticSpec(BaseModel):
    n_objects: int = _SYNTH_DEFAULTS.n_objects
    seed: int = _SYNTH_DEFAULTS.seed
    image_size: int = _SYNTH_DEFAULTS.image_size
    n_levels: int = _SYNTH_DEFAULTS.n_levels
    ring_fraction: float = _SYNTH_DEFAULTS.ring_fraction
    distractor_rate: float = _SYNTH_DEFAULTS.distractor_rate


class CreateSessionRequest(BaseModel):
    synthetic: SyntheticSpec | None = None
    image_b64: str | None = None
    n_levels: int = 3


class PredictRequest(BaseModel):
    center_world: tuple[int, int]
    patch_size: int | None = None
    hr_level: int = 0
    prompts: dict


def _level_meta(pyr: PyramidImage) -> list[dict]:
    return [
        {"level": k, "height": pyr.level_shape(k)[0], "width": pyr.level_shape(k)[1]}
        for k in range(pyr.n_levels)
    ]


def _decode_image_b64(data: str, max_px: int) -> np.ndarray:
    from PIL import Image

    raw = base64.b64decode(data)
    img = Image.open(io.BytesIO(raw)).convert("L")
    if img.width * img.height > max_px:
        raise HTTPException(status_code=413, detail=f"image exceeds the {max_px}px limit")
    return np.asarray(img, dtype=np.float64) / 255.0


def create_app(model: DuoSegModel, ckpt_id: str = "unnamed", max_image_px: int = 4_194_304) -> FastAPI:
    app = FastAPI(title="duoseg inference service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    sessions: dict[str, Session] = {}
    lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with lock:
            sess = sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return sess

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "ckpt_id": ckpt_id, "patch_size": model.cfg.patch_size}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> dict:
        if (req.synthetic is None) == (req.image_b64 is None):
            raise HTTPException(status_code=400, detail="provide exactly one of synthetic | image_b64")
        try:
            if req.synthetic is not None:
                cfg = SynthConfig(n_images=1, **req.synthetic.model_dump())
                if cfg.image_size * cfg.image_size > max_image_px:
                    raise HTTPException(status_code=413, detail=f"image exceeds the {max_image_px}px limit")
                pyramid = synth_dataset(cfg)[0]
            else:
                image = _decode_image_b64(req.image_b64, max_image_px)
                pyramid = build_pyramid(image, None, req.n_levels, id=f"upload-{uuid.uuid4().hex[:8]}")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        sess = Session(id=uuid.uuid4().hex, pyramid=pyramid, ckpt_id=ckpt_id)
        with lock:
            sessions[sess.id] = sess
        return {"id": sess.id, "source_id": pyramid.id, "levels": _level_meta(pyramid)}

    @app.get("/sessions/{session_id}")
    def session_meta(session_id: str) -> dict:
        sess = get_session(session_id)
        return {
            "id": sess.id,
            "source_id": sess.pyramid.id,
            "levels": _level_meta(sess.pyramid),
            "n_prompts_recorded": len(sess.prompt_history),
        }

    @app.get("/sessions/{session_id}/tile")
    def tile(session_id: str, level: int, row: int, col: int) -> Response:
        from PIL import Image

        sess = get_session(session_id)
        pyr = sess.pyramid
        if not 0 <= level < pyr.n_levels:
            raise HTTPException(status_code=404, detail=f"level {level} out of range")
        arr = pyr.levels[level]
        h, w = arr.shape[:2]
        n_rows = -(-h // TILE_SIZE)
        n_cols = -(-w // TILE_SIZE)
        if not (0 <= row < n_rows and 0 <= col < n_cols):
            raise HTTPException(status_code=404, detail=f"tile ({row},{col}) out of range for level {level}")
        r0, c0 = row * TILE_SIZE, col * TILE_SIZE
        block = arr[r0 : min(r0 + TILE_SIZE, h), c0 : min(c0 + TILE_SIZE, w)]
        pixels = np.round(np.clip(block, 0.0, 1.0) * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="L").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/sessions/{session_id}/predict")
    def predict(session_id: str, req: PredictRequest) -> dict:
        sess = get_session(session_id)
        p = req.patch_size or model.cfg.patch_size
        if p != model.cfg.patch_size:
            raise HTTPException(
                status_code=400,
                detail=f"patch_size {p} unsupported: the loaded checkpoint expects {model.cfg.patch_size}",
            )
        try:
            prompt_objs = parse_prompt_json(req.prompts, p)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        try:
            pair = extract_pair(sess.pyramid, tuple(req.center_world), req.hr_level, p)
        except ValueError as exc:
            raise HTTPException(status_code=409, detail=str(exc))

        t0 = time.perf_counter()
        pred = model.predict(pair, **prompt_objs)
        latency_ms = (time.perf_counter() - t0) * 1000.0
        with lock:
            sess.prompt_history.append(req.prompts)

        s = 2**req.hr_level
        r, c = req.center_world
        half_hr = (p // 2) * s
        half_lr = p * s
        return {
            "hr_mask_rle": rle_encode(pred.hr_mask),
            "lr_mask_rle": rle_encode(pred.lr_mask),
            "mask_shape": [p, p],
            "hr_extent": {"r0": r - half_hr, "c0": c - half_hr, "r1": r + half_hr, "c1": c + half_hr},
            "lr_extent": {"r0": r - half_lr, "c0": c - half_lr, "r1": r + half_lr, "c1": c + half_lr},
            "iou_estimate": pred.iou_estimate,
            "latency_ms": latency_ms,
        }

    return app
