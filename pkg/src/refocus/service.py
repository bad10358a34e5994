"""HTTP rendering service: upload a session, render refocused previews/exports."""

from __future__ import annotations

import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, File, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from PIL import Image
from pydantic import BaseModel

from .errormap import compute_error_map
from .fusion import MODES, RenderRequest, focus_from_point, render
from .multiscale import NR_MODES, CoreConfig
from .raster import (ApertureSpec, RenderParams, as_image, normalize_disparity,
                     resize_bilinear)

PREVIEW_MAX_DIM = 768
MAX_PIXELS = 24_000_000
SESSION_TTL_SECONDS = 30 * 60


@dataclass
class SessionState:
    image: np.ndarray
    disparity: np.ndarray | None
    preview_image: np.ndarray
    preview_disparity: np.ndarray | None
    d_min: float
    d_max: float
    last_access: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock)


class RenderBody(BaseModel):
    session_id: str
    K: float
    d_f: float | None = None
    focus_point: tuple[int, int] | None = None
    gamma: float = 2.2
    blades: int = 0
    rotation: float = 0.0
    quality: str = "preview"
    mode: str = "hybrid"
    nr_mode: str = "full"


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode == "RGB":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif im.mode == "L":
                g = np.asarray(im, dtype=np.float64) / 255.0
                arr = np.stack([g, g, g], axis=-1)
            elif im.mode in ("I", "I;16"):
                g = np.asarray(im, dtype=np.float64) / 65535.0
                arr = np.stack([g, g, g], axis=-1)
            else:
                raise ApiError(400, f"unsupported image mode {im.mode!r}")
    except ApiError:
        raise
    except Exception as exc:
        raise ApiError(400, f"cannot decode image: {exc}") from exc
    return as_image(arr)


def _decode_disparity(data: bytes) -> np.ndarray:
    if data[:3] in (b"Pf\n", b"Pf\r"):
        import tempfile

        with tempfile.NamedTemporaryFile(suffix=".pfm") as tmp:
            tmp.write(data)
            tmp.flush()
            from .raster import read_pfm

            try:
                return read_pfm(tmp.name)
            except ValueError as exc:
                raise ApiError(400, str(exc)) from exc
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.mode in ("I", "I;16"):
                return np.asarray(im, dtype=np.float64) / 65535.0
            if im.mode == "L":
                return np.asarray(im, dtype=np.float64) / 255.0
            raise ApiError(400, f"disparity must be single channel, got mode {im.mode!r}")
    except ApiError:
        raise
    except Exception as exc:
        raise ApiError(400, f"cannot decode disparity: {exc}") from exc


def _preview_dims(width: int, height: int) -> tuple[int, int]:
    scale = PREVIEW_MAX_DIM / max(width, height)
    if scale >= 1.0:
        return width, height
    return max(1, round(width * scale)), max(1, round(height * scale))


def _png_response(img: np.ndarray, headers: dict | None = None) -> Response:
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, "RGB").save(buf, format="PNG")
    return Response(buf.getvalue(), media_type="image/png", headers=headers or {})


def create_app(ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="refocus")
    sessions: dict[str, SessionState] = {}
    sessions_lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse({"error": exc.message}, status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse({"error": str(exc)}, status_code=400)

    @app.exception_handler(Exception)
    async def internal_handler(request: Request, exc: Exception):
        return JSONResponse({"error": f"internal error: {exc}"}, status_code=500)

    def _prune():
        now = time.monotonic()
        with sessions_lock:
            dead = [k for k, s in sessions.items()
                    if now - s.last_access > SESSION_TTL_SECONDS]
            for k in dead:
                del sessions[k]

    def _get_session(session_id: str) -> SessionState:
        _prune()
        with sessions_lock:
            state = sessions.get(session_id)
            if state is None:
                raise ApiError(404, f"unknown session {session_id!r}")
            state.last_access = time.monotonic()
            return state

    @app.get("/health")
    def health():
        return PlainTextResponse("ok")

    @app.post("/session")
    def create_session(image: UploadFile = File(...),
                       disparity: UploadFile | None = File(None)):
        img = _decode_image(image.file.read())
        h, w = img.shape[:2]
        if w * h > MAX_PIXELS:
            raise ApiError(413, f"image has {w * h} pixels, limit is {MAX_PIXELS}")
        disp = None
        if disparity is not None:
            raw = _decode_disparity(disparity.file.read())
            disp = normalize_disparity(raw)
            if disp.shape != (h, w):
                disp = resize_bilinear(disp, w, h)
        pw, ph = _preview_dims(w, h)
        state = SessionState(
            image=img,
            disparity=disp,
            preview_image=resize_bilinear(img, pw, ph),
            preview_disparity=None if disp is None else resize_bilinear(disp, pw, ph),
            d_min=0.0 if disp is None else float(disp.min()),
            d_max=0.0 if disp is None else float(disp.max()),
        )
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = state
        return {"session_id": session_id, "width": w, "height": h}

    def _resolve_focus(state: SessionState, body: RenderBody) -> float:
        if (body.d_f is None) == (body.focus_point is None):
            raise ApiError(400, "provide exactly one of d_f or focus_point")
        if body.d_f is not None:
            if not 0.0 <= body.d_f <= 1.0:
                raise ApiError(400, f"d_f must be in [0, 1], got {body.d_f}")
            return body.d_f
        x, y = body.focus_point
        h, w = state.disparity.shape
        if not (0 <= x < w and 0 <= y < h):
            raise ApiError(400, f"focus point ({x}, {y}) outside {w}x{h} frame")
        # median window on the native-resolution map, matching the CLI
        return focus_from_point(state.disparity, x, y)

    def _check_params(body: RenderBody):
        if body.K < 0:
            raise ApiError(400, f"K must be >= 0, got {body.K}")
        if not 1.0 <= body.gamma <= 5.0:
            raise ApiError(400, f"gamma must be in [1, 5], got {body.gamma}")
        if body.blades != 0 and body.blades < 3:
            raise ApiError(400, f"blades must be 0 or >= 3, got {body.blades}")
        if body.quality not in ("preview", "full"):
            raise ApiError(400, f"quality must be preview or full, got {body.quality!r}")
        if body.mode not in MODES:
            raise ApiError(400, f"mode must be one of {MODES}")
        if body.nr_mode not in NR_MODES:
            raise ApiError(400, f"nr_mode must be one of {NR_MODES}")

    @app.post("/render")
    def render_endpoint(body: RenderBody):
        state = _get_session(body.session_id)
        if state.disparity is None:
            raise ApiError(400, "session has no disparity map; upload one (the "
                                "service does not estimate disparity)")
        _check_params(body)
        d_f = _resolve_focus(state, body)
        if body.quality == "full":
            img, disp = state.image, state.disparity
            K = body.K
        else:
            img, disp = state.preview_image, state.preview_disparity
            K = body.K * img.shape[1] / state.image.shape[1]
        params = RenderParams(K=K, d_f=d_f, gamma=body.gamma,
                              aperture=ApertureSpec(body.blades, body.rotation))
        with state.lock:
            result = render(RenderRequest(img, disp, params,
                                          CoreConfig.from_mode(body.nr_mode), body.mode))
        return _png_response(np.clip(result.image, 0.0, 1.0),
                             headers={"X-Refocus-Df": f"{d_f:.6f}"})

    @app.get("/errormap")
    def errormap_endpoint(session_id: str, K: float, d_f: float | None = None,
                          focus_x: int | None = None, focus_y: int | None = None,
                          quality: str = "preview"):
        state = _get_session(session_id)
        if state.disparity is None:
            raise ApiError(400, "session has no disparity map")
        point = (focus_x, focus_y) if focus_x is not None and focus_y is not None else None
        body = RenderBody(session_id=session_id, K=K, d_f=d_f, focus_point=point,
                          quality=quality)
        _check_params(body)
        d_f = _resolve_focus(state, body)
        if quality == "full":
            disp, K_eff = state.disparity, K
        else:
            disp = state.preview_disparity
            K_eff = K * disp.shape[1] / state.disparity.shape[1]
        E = compute_error_map(disp, RenderParams(K=K_eff, d_f=d_f))
        return _png_response(np.repeat(E[:, :, None], 3, axis=2),
                             headers={"X-Refocus-Df": f"{d_f:.6f}"})

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
