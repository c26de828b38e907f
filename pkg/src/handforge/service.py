"""Local annotation service: serves the browser tool, streams real images,
persists human-drawn polygon rings and exports a test-split manifest.

Single-user lab tool: no auth, per-image files written atomically
(temp + rename), last write wins. Polygons stay the editable source of
truth; the rasterized RLE and bbox are derived at save time.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse, JSONResponse
from PIL import Image

from .dataset import (
    Annotation,
    DatasetManifest,
    ManifestRecord,
    RleMask,
    polygon_to_mask,
    rle_encode,
    write_manifest,
)
from .errors import ConfigError, HandforgeError, InvalidSpecError
from .masks import bbox_from_mask
from .randomize import IMAGE_EXTENSIONS

STATE_DIR_NAME = ".handforge_annotations"

UNANNOTATED = "unannotated"
DRAFT = "draft"
COMMITTED = "committed"


@dataclass
class ImageEntry:
    image_id: str
    file_name: str
    width: int
    height: int


class AnnotationSession:
    """Annotation state for one directory of real images."""

    def __init__(self, image_dir, manifest_path=None):
        self.image_dir = str(image_dir)
        if not os.path.isdir(self.image_dir):
            raise ConfigError(f"image directory not found: {self.image_dir!r}")
        self.state_dir = os.path.join(self.image_dir, STATE_DIR_NAME)
        os.makedirs(self.state_dir, exist_ok=True)
        self.manifest_path = str(manifest_path) if manifest_path \
            else os.path.join(self.image_dir, "annotations.json")
        self._entries: dict[str, ImageEntry] = {}
        for fname in sorted(os.listdir(self.image_dir)):
            if not fname.lower().endswith(IMAGE_EXTENSIONS):
                continue
            path = os.path.join(self.image_dir, fname)
            with Image.open(path) as im:
                width, height = im.size
            image_id = os.path.splitext(fname)[0]
            self._entries[image_id] = ImageEntry(image_id, fname, width, height)

    # -- queries -------------------------------------------------------------

    def list_images(self) -> list[dict]:
        return [
            {"id": e.image_id, "width": e.width, "height": e.height,
             "state": self.state(e.image_id)}
            for e in self._entries.values()
        ]

    def entry(self, image_id: str) -> ImageEntry:
        if image_id not in self._entries:
            raise KeyError(image_id)
        return self._entries[image_id]

    def image_path(self, image_id: str) -> str:
        return os.path.join(self.image_dir, self.entry(image_id).file_name)

    def _state_path(self, image_id: str) -> str:
        return os.path.join(self.state_dir, f"{image_id}.json")

    def state(self, image_id: str) -> str:
        doc = self._load_doc(image_id)
        return doc["state"] if doc else UNANNOTATED

    def _load_doc(self, image_id: str):
        path = self._state_path(image_id)
        if not os.path.exists(path):
            return None
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def get_annotation(self, image_id: str) -> dict:
        self.entry(image_id)
        doc = self._load_doc(image_id)
        if doc is None:
            return {"image_id": image_id, "rings": [], "state": UNANNOTATED}
        return {"image_id": image_id, "rings": doc["rings"], "state": doc["state"]}

    # -- writes ----------------------------------------------------------------

    def put_annotation(self, image_id: str, rings) -> dict:
        entry = self.entry(image_id)
        rings = [[[float(x), float(y)] for x, y in ring] for ring in rings]
        for index, ring in enumerate(rings):
            if len(ring) < 3:
                raise InvalidSpecError(f"ring {index} needs at least 3 points")
            for x, y in ring:
                if not (0.0 <= x <= entry.width and 0.0 <= y <= entry.height):
                    raise InvalidSpecError(
                        f"ring {index} vertex ({x:g}, {y:g}) outside image")
        previous = self.state(image_id)
        if rings:
            mask = polygon_to_mask(rings, (entry.height, entry.width))
            rle = rle_encode(mask)
            bbox = bbox_from_mask(mask)
            doc = {
                "image_id": image_id,
                "rings": rings,
                "state": COMMITTED,
                "segmentation": {"size": [entry.height, entry.width],
                                 "counts": list(rle.runs)},
                "bbox": bbox.to_xywh() if bbox else [0.0, 0.0, 0.0, 0.0],
            }
        else:
            if previous == COMMITTED:
                raise InvalidSpecError(
                    "cannot clear a committed annotation (states only move forward)")
            doc = {"image_id": image_id, "rings": [], "state": DRAFT}
        self._atomic_write(self._state_path(image_id), doc)
        return doc

    def _atomic_write(self, path: str, doc: dict) -> None:
        fd, tmp = tempfile.mkstemp(dir=self.state_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    # -- export ------------------------------------------------------------------

    def export_manifest(self) -> DatasetManifest:
        manifest = DatasetManifest(
            name=os.path.basename(os.path.normpath(self.image_dir)) or "real",
            preset="real", seed=0, root=self.image_dir)
        numeric_id = 0
        for entry in self._entries.values():
            doc = self._load_doc(entry.image_id)
            if not doc or doc["state"] != COMMITTED:
                continue
            seg = doc["segmentation"]
            rle = RleMask(width=int(seg["size"][1]), height=int(seg["size"][0]),
                          runs=tuple(int(v) for v in seg["counts"]))
            from .masks import BBox
            xywh = doc["bbox"]
            bbox = BBox.from_xywh(xywh) if xywh[2] > 0 and xywh[3] > 0 else None
            annotation = Annotation(image_id=numeric_id, rle=rle, bbox=bbox,
                                    polygons=doc["rings"])
            manifest.records.append(ManifestRecord(
                image_id=numeric_id, file_name=entry.file_name,
                width=entry.width, height=entry.height, split="test",
                annotation=annotation, root=self.image_dir))
            numeric_id += 1
        if not manifest.records:
            raise HandforgeError("nothing to export: no committed annotations")
        write_manifest(manifest, self.manifest_path)
        return manifest


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

_FALLBACK_PAGE = """<!doctype html>
<html><head><title>handforge annotator</title></head>
<body><h1>handforge annotation service</h1>
<p>The UI bundle was not found. Build it with <code>npm run build</code> in
the frontend/ directory, or point --ui at a built bundle.</p>
<p>The JSON API lives under <code>/api/</code>.</p></body></html>
"""

_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg", ".jpeg": "image/jpeg",
                ".bmp": "image/bmp", ".ppm": "image/x-portable-pixmap"}


def default_ui_dir() -> str | None:
    """Locate the built frontend bundle next to an installed/source tree."""
    here = os.path.dirname(os.path.abspath(__file__))
    candidates = [
        os.path.join(here, "ui"),
        os.path.abspath(os.path.join(here, "..", "..", "..", "frontend", "dist")),
        os.path.abspath(os.path.join(here, "..", "..", "frontend", "dist")),
    ]
    for cand in candidates:
        if os.path.isfile(os.path.join(cand, "index.html")):
            return cand
    return None


def create_app(image_dir, manifest_path=None, ui_dir=None) -> FastAPI:
    session = AnnotationSession(image_dir, manifest_path)
    ui_dir = ui_dir or default_ui_dir()
    app = FastAPI(title="handforge annotator")
    app.state.session = session

    @app.get("/", response_class=HTMLResponse)
    def index():
        if ui_dir:
            return FileResponse(os.path.join(ui_dir, "index.html"))
        return HTMLResponse(_FALLBACK_PAGE)

    @app.get("/static/{name}")
    def static_file(name: str):
        if not ui_dir:
            raise HTTPException(404, "no UI bundle")
        path = os.path.normpath(os.path.join(ui_dir, name))
        if not path.startswith(os.path.abspath(ui_dir)) or not os.path.isfile(path):
            raise HTTPException(404, f"no static file {name}")
        return FileResponse(path)

    @app.get("/api/images")
    def list_images():
        return session.list_images()

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        try:
            path = session.image_path(image_id)
        except KeyError:
            raise HTTPException(404, f"unknown image id {image_id!r}")
        ext = os.path.splitext(path)[1].lower()
        return FileResponse(path, media_type=_MEDIA_TYPES.get(ext, "application/octet-stream"))

    @app.get("/api/annotations/{image_id}")
    def get_annotation(image_id: str):
        try:
            return session.get_annotation(image_id)
        except KeyError:
            raise HTTPException(404, f"unknown image id {image_id!r}")

    @app.put("/api/annotations/{image_id}")
    def put_annotation(image_id: str, payload: dict):
        rings = payload.get("rings", [])
        try:
            return session.put_annotation(image_id, rings)
        except KeyError:
            raise HTTPException(404, f"unknown image id {image_id!r}")
        except (InvalidSpecError, ValueError, TypeError) as exc:
            raise HTTPException(422, str(exc))

    @app.post("/api/export")
    def export():
        try:
            manifest = session.export_manifest()
        except HandforgeError as exc:
            raise HTTPException(400, str(exc))
        return JSONResponse({"manifest": session.manifest_path,
                             "records": len(manifest.records)})

    return app


def serve(image_dir, port: int = 8008, host: str = "127.0.0.1",
          manifest_path=None, ui_dir=None) -> None:
    import uvicorn

    app = create_app(image_dir, manifest_path, ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
