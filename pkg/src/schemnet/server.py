"""Serve-mode HTTP API backing the review UI.

Each subdirectory of the job dir holding an `image.pgm` is a job. Overrides
are persisted per job to `overrides.json` (append-only, applied in order) and
replayed on every conversion, so a restart reproduces the same state."""

from __future__ import annotations

import json
import threading
from pathlib import Path

import cv2
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from . import pipeline, text
from .config import Config
from .detect import components_to_doc
from .raster import load_image


class Job:
    def __init__(self, job_id: str, directory: Path, cfg: Config):
        self.id = job_id
        self.dir = directory
        self.cfg = cfg
        self.lock = threading.Lock()  # one writer per job
        self._result: pipeline.ConvertResult | None = None

    # -- persistence ------------------------------------------------------
    @property
    def overrides_path(self) -> Path:
        return self.dir / "overrides.json"

    def load_overrides(self) -> list[pipeline.Override]:
        if not self.overrides_path.is_file():
            return []
        docs = json.loads(self.overrides_path.read_text())
        return pipeline.parse_overrides(docs)

    def save_overrides(self, overrides: list[pipeline.Override]) -> None:
        docs = [ov.to_json() for ov in overrides]
        self.overrides_path.write_text(json.dumps(docs, indent=2) + "\n")

    # -- pipeline ---------------------------------------------------------
    def _external_docs(self) -> tuple:
        det = ocr = None
        if (self.dir / "detections.json").is_file():
            det = json.loads((self.dir / "detections.json").read_text())
        if (self.dir / "ocr.json").is_file():
            ocr = json.loads((self.dir / "ocr.json").read_text())
        return det, ocr

    def convert(self, overrides=None) -> pipeline.ConvertResult:
        if overrides is None:
            overrides = self.load_overrides()
        det, ocr = self._external_docs()
        img = load_image((self.dir / "image.pgm").read_bytes())
        return pipeline.convert_image(
            img, cfg=self.cfg, detections_doc=det, ocr_doc=ocr,
            overrides=overrides,
        )

    def result(self, refresh: bool = False) -> pipeline.ConvertResult:
        with self.lock:
            if self._result is None or refresh:
                self._result = self.convert()
            return self._result

    # -- serialization ----------------------------------------------------
    def to_json(self, full: bool = False) -> dict:
        res = self.result()
        doc = {
            "id": self.id,
            "status": res.status(),
            "flags": len(res.flags),
            "unresolved": len(res.unresolved_flags()),
        }
        if full:
            flags_doc = res.flags_doc()
            doc.update({
                "image": f"/api/jobs/{self.id}/image",
                "components": components_to_doc(res.components, res.img_dims),
                "nets": pipeline.connect.nets_debug_doc(res.nodemap),
                "texts": text.texts_to_doc(res.texts),
                "flags": flags_doc["flags"],
                "warnings": flags_doc["warnings"],
                "netlist": res.netlist_text,
                "overrides": [ov.to_json() for ov in self.load_overrides()],
                "config": res.config.as_dict(),
            })
        return doc


def create_app(jobdir: Path, cfg: Config | None = None) -> FastAPI:
    cfg = cfg or Config()
    app = FastAPI(title="schemnet review API")
    jobs: dict[str, Job] = {}
    for sub in sorted(Path(jobdir).iterdir()):
        if sub.is_dir() and (sub / "image.pgm").is_file():
            jobs[sub.name] = Job(sub.name, sub, cfg)

    def get_job(job_id: str) -> Job:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return job

    @app.get("/api/jobs")
    def list_jobs():
        return {"jobs": [jobs[k].to_json() for k in sorted(jobs)]}

    @app.get("/api/jobs/{job_id}")
    def job_detail(job_id: str):
        return get_job(job_id).to_json(full=True)

    @app.get("/api/jobs/{job_id}/image")
    def job_image(job_id: str):
        job = get_job(job_id)
        img = load_image((job.dir / "image.pgm").read_bytes())
        ok, buf = cv2.imencode(".png", img.data)
        if not ok:
            raise HTTPException(status_code=500, detail="PNG encoding failed")
        return Response(content=buf.tobytes(), media_type="image/png")

    @app.post("/api/jobs/{job_id}/overrides")
    def post_overrides(job_id: str, body: list[dict]):
        job = get_job(job_id)
        try:
            new = pipeline.parse_overrides(body)
            merged = job.load_overrides() + new
            job.convert(overrides=merged)  # full validation against the job
        except pipeline.OverrideError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        with job.lock:
            job.save_overrides(merged)
            job._result = None
        return {"overrides": [ov.to_json() for ov in merged]}

    @app.post("/api/jobs/{job_id}/regenerate")
    def regenerate(job_id: str):
        job = get_job(job_id)
        res = job.result(refresh=True)
        flags_doc = res.flags_doc()
        return {
            "id": job.id,
            "status": res.status(),
            "netlist": res.netlist_text,
            "flags": flags_doc["flags"],
            "warnings": flags_doc["warnings"],
        }

    bundle = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if bundle.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(bundle), html=True), name="ui")
    return app
