"""HTTP surface: sessions, multimodal messages, generation, grounding.

All routes live under /v1 and answer JSON with a schema_version field;
errors use the shape {code, message, stage}.  Message handling is serialized
per session, turns are appended only as complete human+assistant pairs, and
grounding always runs post-hoc over the already-generated reply against the
most recent image in the session.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles

from .. import media
from ..data.builders import negative_response_violations
from ..errors import AdapterError, InputError, PromptError
from ..grounding.adapters import AdapterSet
from ..grounding.overlay import mask_to_png
from ..grounding.pipeline import GroundingConfig, GroundingResult, run_pipeline
from ..types import ChatTurn, Modality, ModalityInput, Role
from .backends import ChatBackend, TurnContext
from .sessions import Session, SessionStore

SCHEMA_VERSION = 1
DEFAULT_UPLOAD_CAP = 20 * 1024 * 1024

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, stage: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.stage = stage

    def body(self) -> dict[str, Any]:
        return {"code": self.code, "message": str(self), "stage": self.stage}


def create_app(
    backend: ChatBackend,
    adapters: AdapterSet | None = None,
    *,
    grounding_config: GroundingConfig = GroundingConfig(),
    max_upload_bytes: int = DEFAULT_UPLOAD_CAP,
    allow_pure_text: bool = False,
    ui_dir: Path | str | None = None,
    store: SessionStore | None = None,
) -> FastAPI:
    """Build the service around a reply backend and optional grounding adapters."""
    app = FastAPI(title="groundchat", docs_url=None, redoc_url=None)
    app.state.store = store if store is not None else SessionStore()
    sessions: SessionStore = app.state.store

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(exc.body(), status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            {"code": "invalid_request", "message": str(exc.errors()), "stage": "request"},
            status_code=422,
        )

    def _session_or_404(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise ApiError(404, "not_found", f"no session {session_id}", "session")
        return session

    @app.get("/v1/health")
    def health() -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok",
            "backend": backend.name,
            "grounding": adapters is not None,
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session() -> dict[str, Any]:
        return sessions.create().snapshot()

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        return _session_or_404(session_id).snapshot()

    @app.get("/v1/sessions/{session_id}/masks/{mask_id}")
    def get_mask(session_id: str, mask_id: str) -> Response:
        session = _session_or_404(session_id)
        mask = session.masks.get(mask_id)
        if mask is None:
            raise ApiError(404, "not_found", f"no mask {mask_id}", "mask")
        png = mask_to_png(mask.width, mask.height, mask.to_bitmap())
        return Response(content=png, media_type="image/png")

    def _read_upload(part: UploadFile | None, kind: Modality) -> ModalityInput | None:
        if part is None:
            return None
        payload = part.file.read()
        if len(payload) > max_upload_bytes:
            raise ApiError(
                413, "payload_too_large",
                f"{kind.value} upload of {len(payload)} bytes exceeds cap "
                f"{max_upload_bytes}", "upload",
            )
        try:
            item = media.modality_input_from_upload(payload, kind)
            # decode eagerly so a corrupt file fails here, not mid-generation
            if kind is Modality.IMAGE:
                media.image_size(item)
            else:
                media.decode_audio(item)
        except InputError as exc:
            raise ApiError(422, "undecodable_media", str(exc), "upload") from exc
        return item

    @app.post("/v1/sessions/{session_id}/messages")
    def post_message(
        session_id: str,
        text: str = Form(...),
        image: UploadFile | None = File(None),
        audio: UploadFile | None = File(None),
    ) -> dict[str, Any]:
        session = _session_or_404(session_id)
        with session.lock:
            return _handle_message(session, text, image, audio)

    def _handle_message(
        session: Session,
        text: str,
        image_part: UploadFile | None,
        audio_part: UploadFile | None,
    ) -> dict[str, Any]:
        if not text.strip():
            raise ApiError(422, "invalid_request", "text must be non-empty", "request")
        new_image = _read_upload(image_part, Modality.IMAGE)
        new_audio = _read_upload(audio_part, Modality.AUDIO)
        if (
            new_image is None and new_audio is None
            and not session.attachments and not allow_pure_text
        ):
            raise ApiError(
                422, "invalid_request",
                "pure-text chat is disabled; attach an image or audio", "request",
            )

        scope_image_digest = new_image.digest if new_image else session.latest_image
        scope_audio_digest = new_audio.digest if new_audio else session.latest_audio
        media_map = dict(session.attachments)
        for item in (new_image, new_audio):
            if item is not None:
                media_map[item.digest] = item
        scope_image = media_map.get(scope_image_digest) if scope_image_digest else None
        scope_audio = media_map.get(scope_audio_digest) if scope_audio_digest else None

        ctx = TurnContext(
            turns=tuple(session.turns),
            instruction=text,
            media=media_map,
            new_image=new_image,
            new_audio=new_audio,
            scope_image=scope_image,
            scope_audio=scope_audio,
        )
        try:
            reply_text = backend.reply(ctx)
        except PromptError as exc:
            raise ApiError(422, "invalid_request", str(exc), "prompt") from exc
        except InputError as exc:
            raise ApiError(422, "invalid_request", str(exc), "generation") from exc
        except Exception as exc:
            raise ApiError(
                503, "adapter_unavailable", f"generation failed: {exc}", "generation"
            ) from exc

        assistant_index = len(session.turns) + 1
        grounding_payload: dict[str, Any] | None = None
        grounding_error: str | None = None
        new_masks: dict[str, Any] = {}
        if scope_image is not None and adapters is not None:
            try:
                result = run_pipeline(scope_image, reply_text, adapters, grounding_config)
                grounding_payload = _shape_grounding(
                    result, assistant_index, new_masks
                )
            except AdapterError as exc:
                # the reply survives; grounding is reported as absent
                logger.warning("grounding unavailable: %s", exc)
                grounding_error = str(exc)

        related_verdict: str | None = None
        if scope_image is not None and scope_audio is not None:
            related_verdict = _verdict(reply_text)

        human_refs = tuple(
            item.ref() for item in (new_image, new_audio) if item is not None
        )
        human_turn = ChatTurn(role=Role.HUMAN, text=text, attachments=human_refs)
        human_payload = {
            "role": "human",
            "text": text,
            "attachments": [r.to_dict() for r in human_refs],
        }
        assistant_payload = {
            "role": "assistant",
            "text": reply_text,
            "grounding": grounding_payload,
            "grounding_error": grounding_error,
            "related_verdict": related_verdict,
        }
        assistant_turn = ChatTurn(role=Role.ASSISTANT, text=reply_text)

        for item in (new_image, new_audio):
            if item is not None:
                session.attachments[item.digest] = item
        if new_image is not None:
            session.latest_image = new_image.digest
        if new_audio is not None:
            session.latest_audio = new_audio.digest
        session.masks.update(new_masks)
        session.append_exchange(human_turn, human_payload, assistant_turn, assistant_payload)

        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": session.id,
            "turn_index": assistant_index,
            "reply": assistant_payload,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    # referenced so linters see the route functions as used
    del health, create_session, get_session, get_mask, post_message
    return app


def _shape_grounding(
    result: GroundingResult, turn_index: int, mask_registry: dict
) -> dict[str, Any]:
    """Wire form of a grounding result: masks become ids served separately."""
    payload = result.to_dict(include_timings=False)
    for i, (entity, entity_dict) in enumerate(zip(result.entities, payload["entities"])):
        entity_dict.pop("mask", None)
        if entity.mask is not None:
            mask_id = f"t{turn_index}e{i}"
            mask_registry[mask_id] = entity.mask
            entity_dict["mask_id"] = mask_id
        else:
            entity_dict["mask_id"] = None
    return payload


def _verdict(reply_text: str) -> str:
    """Coarse audio-image relatedness read off the reply's shape."""
    if not negative_response_violations(reply_text):
        return "unrelated"
    if reply_text.startswith(("Yes", "yes")):
        return "related"
    return "uncertain"
