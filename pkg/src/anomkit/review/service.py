"""HTTP review service: serves candidates and images, records verdicts.

Endpoints:

    GET  /api/queue/next?annotator=ID  -> next card or {"exhausted": true}
    POST /api/verdicts                 -> {"ok": true} once durably logged
    GET  /api/progress                 -> {"pending", "accepted", "rejected", "unsure"}
    GET  /api/images/{image_id}        -> image bytes (or redirect for remote URIs)

Verdicts are flushed and fsynced to the append-only JSONL log before the
acknowledgment is sent; restarting the service replays the log. No
authentication beyond the annotator_id string.
"""

from __future__ import annotations

import json
import mimetypes
import os
import threading
from pathlib import Path
from typing import Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..records import (
    ImageAnnotation,
    Verdict,
    load_verdicts,
    make_verdict,
    verdict_to_obj,
)
from .queue import ReviewQueue, UnknownItemError


class VerdictIn(BaseModel):
    image_id: str
    anomaly_index: int
    decision: Literal["accept", "reject", "unsure"]
    annotator_id: str


class ReviewSession:
    """One loaded queue plus its durable verdict log."""

    def __init__(
        self,
        annotations: list[ImageAnnotation],
        log_path: str | Path,
        *,
        images_root: str | Path | None = None,
    ):
        self.queue = ReviewQueue(annotations)
        self.log_path = Path(log_path)
        self.images_root = Path(images_root) if images_root else None
        self._write_lock = threading.Lock()
        if self.log_path.exists():
            self.queue.replay(load_verdicts(self.log_path))

    def submit(self, request: VerdictIn) -> Verdict:
        verdict = make_verdict(
            request.image_id, request.anomaly_index, request.decision, request.annotator_id
        )
        self.queue.apply(verdict)  # validates the item before anything is written
        with self._write_lock:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with self.log_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(verdict_to_obj(verdict)) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
        return verdict

    def resolve_image(self, image_id: str) -> str | Path | None:
        uri = self.queue.image_uris.get(image_id)
        if uri is None:
            return None
        if uri.startswith(("http://", "https://")):
            return uri
        path = Path(uri)
        if not path.is_absolute() and self.images_root is not None:
            path = self.images_root / path
        return path


def create_app(session: ReviewSession | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="anomaly review service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.session = session

    def require_session() -> ReviewSession:
        if app.state.session is None:
            raise HTTPException(status_code=409, detail="review queue not loaded")
        return app.state.session

    @app.get("/api/queue/next")
    def queue_next(annotator: str) -> dict:
        active = require_session()
        progress = active.queue.progress().__dict__
        item = active.queue.next_item(annotator)
        if item is None:
            return {"exhausted": True, "progress": progress}
        return {
            "image_id": item.image_id,
            "anomaly_index": item.anomaly_index,
            "anomaly": {
                "name": item.anomaly.name,
                "phenomenon": item.anomaly.phenomenon,
                "reasoning": item.anomaly.reasoning,
                "severity": item.anomaly.severity,
            },
            "image_uri": item.image_uri,
            "image_url": f"/api/images/{item.image_id}",
            "progress": progress,
        }

    @app.post("/api/verdicts")
    def submit_verdict(request: VerdictIn) -> dict:
        active = require_session()
        try:
            verdict = active.submit(request)
        except UnknownItemError as err:
            raise HTTPException(status_code=404, detail=str(err))
        return {"ok": True, "timestamp": verdict.timestamp.isoformat()}

    @app.get("/api/progress")
    def progress() -> dict:
        return require_session().queue.progress().__dict__

    @app.get("/api/images/{image_id}")
    def image(image_id: str):
        active = require_session()
        target = active.resolve_image(image_id)
        if target is None:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        if isinstance(target, str):
            return RedirectResponse(target)
        if not target.is_file():
            raise HTTPException(status_code=404, detail=f"image file missing: {target}")
        media_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return FileResponse(target, media_type=media_type)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
