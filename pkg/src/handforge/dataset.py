"""On-disk dataset handling: COCO-inspired JSON manifests, RLE mask coding,
polygon rasterization for human annotations, splitting and generation.

Layout of a generated dataset directory:

    <out>/images/000000.png ...
    <out>/annotations.json

The JSON document holds ``info`` (name, preset, seed), ``images`` (id,
file_name, width, height, split) and ``annotations`` (bbox as [x, y, w, h],
segmentation as alternating zero/one run counts in row-major order, and the
source polygons when a human drew them).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .errors import ConfigError, CorruptAnnotationError, InvalidSpecError
from .masks import BBox, as_mask, bbox_from_mask, mask_from_instance
from .randomize import DatasetPreset, RandomizationConfig, sample_scene
from .render import load_image, render, save_image

CATEGORY = "hand"


# ---------------------------------------------------------------------------
# Run-length coding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RleMask:
    width: int
    height: int
    runs: tuple  # alternating 0-run/1-run lengths, starting with zeros

    def __post_init__(self):
        if sum(self.runs) != self.width * self.height:
            raise CorruptAnnotationError(
                f"run lengths sum to {sum(self.runs)}, expected {self.width * self.height}")
        if any(r == 0 for r in self.runs[1:]):
            raise CorruptAnnotationError("zero-length interior run")


def rle_encode(mask) -> RleMask:
    m = as_mask(mask)
    h, w = m.shape
    flat = m.reshape(-1)
    runs = []
    if flat.size:
        changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate([[0], changes, [flat.size]])
        lengths = np.diff(bounds)
        if flat[0]:
            runs.append(0)  # leading zero-run convention when mask starts set
        runs.extend(int(v) for v in lengths)
    return RleMask(width=w, height=h, runs=tuple(runs))


def rle_decode(rle: RleMask) -> np.ndarray:
    total = rle.width * rle.height
    if sum(rle.runs) != total:
        raise CorruptAnnotationError("run sum does not match dimensions")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in rle.runs:
        if value:
            flat[pos:pos + run] = True
        pos += run
        value = not value
    return flat.reshape(rle.height, rle.width)


# ---------------------------------------------------------------------------
# Polygon rasterization (even-odd rule at pixel centers)
# ---------------------------------------------------------------------------

def polygon_to_mask(rings, shape) -> np.ndarray:
    """Rasterize closed polygon rings into a (h, w) mask.

    A pixel is set iff its center lies inside under the even-odd rule, i.e.
    a ray to the right crosses the ring edges an odd number of times.
    """
    h, w = int(shape[0]), int(shape[1])
    crossings = np.zeros((h, w), dtype=np.int32)
    ycenters = np.arange(h, dtype=np.float64) + 0.5
    xcenters = np.arange(w, dtype=np.float64) + 0.5
    for ring_index, ring in enumerate(rings):
        pts = [(float(x), float(y)) for x, y in ring]
        if len(pts) < 3:
            raise InvalidSpecError(
                f"ring {ring_index} has {len(pts)} points; need at least 3")
        for x, y in pts:
            if not (0.0 <= x <= w and 0.0 <= y <= h):
                raise InvalidSpecError(
                    f"ring {ring_index} vertex ({x}, {y}) outside image {w}x{h}")
        for i in range(len(pts)):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % len(pts)]
            rows = (y1 > ycenters) != (y2 > ycenters)
            if not rows.any():
                continue
            yc = ycenters[rows]
            xint = x1 + (yc - y1) * (x2 - x1) / (y2 - y1)
            crossings[rows] += (xint[:, None] > xcenters[None, :]).astype(np.int32)
    return (crossings % 2) == 1


# ---------------------------------------------------------------------------
# Annotations and manifests
# ---------------------------------------------------------------------------

@dataclass
class Annotation:
    image_id: int
    rle: RleMask
    bbox: BBox | None
    polygons: list | None = None  # list of rings, each a list of [x, y]
    category: str = CATEGORY

    def mask(self) -> np.ndarray:
        return rle_decode(self.rle)

    def verify(self):
        derived = bbox_from_mask(self.mask())
        if derived is None and self.bbox is None:
            return
        if derived is None or self.bbox is None or \
                (derived.x1, derived.y1, derived.x2, derived.y2) != \
                (self.bbox.x1, self.bbox.y1, self.bbox.x2, self.bbox.y2):
            raise CorruptAnnotationError(
                f"annotation bbox for image {self.image_id} does not match its mask")


@dataclass
class ManifestRecord:
    image_id: int
    file_name: str  # relative to the manifest root
    width: int
    height: int
    split: str  # train | val | test
    annotation: Annotation
    root: str = "."

    @property
    def image_path(self) -> str:
        return os.path.join(self.root, self.file_name)

    def load_image(self) -> np.ndarray:
        return load_image(self.image_path)

    def mask(self) -> np.ndarray:
        return self.annotation.mask()


@dataclass
class DatasetManifest:
    name: str
    preset: str  # preset provenance name or "real"
    seed: int
    records: list = field(default_factory=list)
    root: str = "."

    def filter_split(self, split: str) -> "DatasetManifest":
        return DatasetManifest(
            name=f"{self.name}/{split}", preset=self.preset, seed=self.seed,
            records=[r for r in self.records if r.split == split], root=self.root)

    @property
    def split_counts(self) -> dict:
        counts: dict = {}
        for r in self.records:
            counts[r.split] = counts.get(r.split, 0) + 1
        return counts


def split_dataset(manifest: DatasetManifest, train_fraction: float,
                  seed: int) -> DatasetManifest:
    """Assign floor(n * fraction) records to train, the rest to val, by
    seeded shuffle. Returns the same manifest with splits set."""
    if not (0.0 < train_fraction < 1.0):
        raise ConfigError("train fraction must be strictly between 0 and 1")
    n = len(manifest.records)
    n_train = math.floor(n * train_fraction)
    order = np.random.default_rng(seed).permutation(n)
    train_ids = set(order[:n_train].tolist())
    for pos, record in enumerate(manifest.records):
        record.split = "train" if pos in train_ids else "val"
    return manifest


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    images = []
    annotations = []
    for rec in manifest.records:
        images.append({
            "id": rec.image_id,
            "file_name": rec.file_name,
            "width": rec.width,
            "height": rec.height,
            "split": rec.split,
        })
        ann = rec.annotation
        entry = {
            "id": rec.image_id,
            "image_id": rec.image_id,
            "category": ann.category,
            "bbox": ann.bbox.to_xywh() if ann.bbox is not None else [0.0, 0.0, 0.0, 0.0],
            "segmentation": {
                "size": [ann.rle.height, ann.rle.width],
                "counts": list(ann.rle.runs),
            },
        }
        if ann.polygons:
            entry["polygons"] = [
                [float(v) for pt in ring for v in pt] for ring in ann.polygons]
        annotations.append(entry)
    return {
        "info": {"name": manifest.name, "preset": manifest.preset,
                 "seed": manifest.seed, "generator": "handforge"},
        "images": images,
        "annotations": annotations,
    }


def write_manifest(manifest: DatasetManifest, path) -> None:
    doc = manifest_to_dict(manifest)
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_manifest(path, check_paths: bool = True, verify: bool = True) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    root = os.path.dirname(os.path.abspath(path))
    info = doc.get("info", {})
    manifest = DatasetManifest(
        name=info.get("name", os.path.basename(root)),
        preset=info.get("preset", "unknown"),
        seed=int(info.get("seed", 0)),
        root=root,
    )
    ann_by_image = {a["image_id"]: a for a in doc.get("annotations", [])}
    seen = set()
    for img in doc.get("images", []):
        image_id = img["id"]
        if image_id in seen:
            raise CorruptAnnotationError(f"duplicate image id {image_id}")
        seen.add(image_id)
        raw = ann_by_image.get(image_id)
        if raw is None:
            raise CorruptAnnotationError(f"image {image_id} has no annotation")
        seg = raw["segmentation"]
        rle = RleMask(width=int(seg["size"][1]), height=int(seg["size"][0]),
                      runs=tuple(int(v) for v in seg["counts"]))
        xywh = raw.get("bbox", [0, 0, 0, 0])
        bbox = BBox.from_xywh(xywh) if xywh[2] > 0 and xywh[3] > 0 else None
        polygons = None
        if "polygons" in raw:
            polygons = [[[ring[i], ring[i + 1]] for i in range(0, len(ring), 2)]
                        for ring in raw["polygons"]]
        annotation = Annotation(image_id=image_id, rle=rle, bbox=bbox,
                                polygons=polygons, category=raw.get("category", CATEGORY))
        if verify:
            annotation.verify()
        record = ManifestRecord(
            image_id=image_id, file_name=img["file_name"], width=int(img["width"]),
            height=int(img["height"]), split=img.get("split", "train"),
            annotation=annotation, root=root)
        if check_paths and not os.path.exists(record.image_path):
            raise ConfigError(f"image file missing: {record.image_path}")
        manifest.records.append(record)
    return manifest


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _generate_record(config: RandomizationConfig, preset_letter: str, seed: int,
                     index: int, out_dir: str, image_format: str):
    preset = DatasetPreset(preset_letter)
    scene = sample_scene(config, preset, seed, index)
    out = render(scene)
    mask = mask_from_instance(out.labels)
    bbox = bbox_from_mask(mask)
    file_name = os.path.join("images", f"{index:06d}.{image_format}")
    save_image(os.path.join(out_dir, file_name), out.color)
    rle = rle_encode(mask)
    return index, file_name, scene.camera.width, scene.camera.height, rle, bbox


def generate_dataset(config: RandomizationConfig, preset: DatasetPreset,
                     count: int, seed: int, out_dir,
                     train_fraction: float = 0.8, jobs: int = 1,
                     image_format: str = "png",
                     name: str | None = None) -> DatasetManifest:
    """Sample, render and write a complete dataset + manifest.

    Output bytes depend only on (config, preset, count, seed), never on the
    worker count: every image is a pure function of its index.
    """
    if count < 1:
        raise ConfigError("count must be >= 1")
    out_dir = str(out_dir)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    args = [(config, preset.letter, seed, i, out_dir, image_format)
            for i in range(count)]
    if jobs > 1:
        with Pool(processes=jobs) as pool:
            results = pool.starmap(_generate_record, args, chunksize=8)
    else:
        results = [_generate_record(*a) for a in args]
    results.sort(key=lambda r: r[0])

    manifest = DatasetManifest(
        name=name or f"{preset.name}-{count}-seed{seed}",
        preset=preset.name, seed=seed, root=out_dir)
    for index, file_name, width, height, rle, bbox in results:
        annotation = Annotation(image_id=index, rle=rle, bbox=bbox)
        manifest.records.append(ManifestRecord(
            image_id=index, file_name=file_name, width=width, height=height,
            split="train", annotation=annotation, root=out_dir))
    split_dataset(manifest, train_fraction, seed)
    write_manifest(manifest, os.path.join(out_dir, "annotations.json"))
    return manifest
