import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List
import numpy as np
from PIL import Image

from ..errors import AnnotationError, CategoryTableError
from ..types import (
    VOID,
    Category,
    CategoryTable,
    Kind,
    PanopticMap,
    Segment,
    Status,
)


MAX_SEGMENT_ID = 256**3 - 1


@dataclass(frozen=True)
class ImageEntry:
    id: int
    width: int
    height: int
    file_name: str = ""
    ## PNG holding the segment ids.
    annotation: str = ""


@dataclass
class DatasetManifest:
    images: List[ImageEntry] = field(default_factory=list)
    categories: CategoryTable = None
    split_name: str = ""

    def __post_init__(self):
        ids = [img.id for img in self.images]
        if len(set(ids)) != len(ids):
            raise AnnotationError("Duplicate image ids in manifest.")

    def __len__(self):
        return len(self.images)


def rgb2id(color):
    color = np.asarray(color)
    if color.ndim == 3 and color.shape[-1] == 3:
        color = color.astype(np.uint32)
        return color[..., 0] + 256 * color[..., 1] + 256 * 256 * color[..., 2]
    return int(color[0]) + 256 * int(color[1]) + 256 * 256 * int(color[2])


def id2rgb(id_map):
    id_map = np.asarray(id_map)
    if id_map.size and int(id_map.max()) > MAX_SEGMENT_ID:
        raise AnnotationError(f"Segment id {int(id_map.max())} exceeds 24-bit PNG range.")

    ids = id_map.astype(np.uint32)
    rgb = np.zeros((*ids.shape, 3), dtype=np.uint8)
    for i in range(3):
        rgb[..., i] = ids % 256
        ids = ids // 256
    return rgb


def _category_from_json(c):
    status = c.get("status", Status.KNOWN.value)
    kind = Kind.THING if c.get("isthing", 0) else Kind.STUFF
    return Category(int(c["id"]), c["name"], kind, status)


def _category_to_json(c):
    return {
        "id": c.id,
        "name": c.name,
        "isthing": int(c.kind == Kind.THING),
        "status": c.status.value,
    }


def load_categories(data):
    entries = [_category_from_json(c) for c in data.get("categories", [])]
    if not any(c.status == Status.VOID for c in entries):
        entries = [Category(VOID, "void", Kind.STUFF, Status.VOID), *entries]
    try:
        return CategoryTable(entries)
    except CategoryTableError as e:
        raise AnnotationError(f"Invalid categories: {e}")


def load_coco_panoptic(json_path, png_dir, split_name=""):
    """Reads a COCO panoptic JSON and its PNG directory.

    Returns the manifest and a dict of image id to :class:`PanopticMap`.
    """
    json_path, png_dir = Path(json_path), Path(png_dir)
    if not json_path.is_file():
        raise AnnotationError(f"Missing annotation file '{json_path}'.")

    with open(json_path) as f:
        data = json.load(f)

    cats = load_categories(data)
    annotations = {a["image_id"]: a for a in data.get("annotations", [])}

    images, maps = [], dict()
    for img in data.get("images", []):
        image_id = img["id"]
        if image_id not in annotations:
            raise AnnotationError(f"Image {image_id} has no annotation entry.")
        ann = annotations[image_id]

        png_path = png_dir / ann["file_name"]
        if not png_path.is_file():
            raise AnnotationError(f"Missing segment PNG '{png_path}'.")
        with Image.open(png_path) as im:
            pixels = rgb2id(np.array(im.convert("RGB"), dtype=np.uint8))

        segments = dict()
        for s in ann.get("segments_info", []):
            sid = int(s["id"])
            if sid in segments:
                raise AnnotationError(f"Image {image_id}: duplicate segment id {sid}.")
            if s["category_id"] not in cats:
                raise AnnotationError(
                    f"Image {image_id}: segment {sid} has unknown category {s['category_id']}."
                )
            segments[sid] = Segment(
                category_id=int(s["category_id"]),
                iscrowd=bool(s.get("iscrowd", 0)),
                area=int(s.get("area", 0)),
            )

        orphans = sorted(set(np.unique(pixels).tolist()) - set(segments) - {VOID})
        if orphans:
            raise AnnotationError(
                f"Image {image_id}: PNG ids {orphans[:5]} absent from segments_info."
            )

        height, width = pixels.shape
        images.append(
            ImageEntry(
                id=image_id,
                width=int(img.get("width", width)),
                height=int(img.get("height", height)),
                file_name=img.get("file_name", ""),
                annotation=ann["file_name"],
            )
        )
        maps[image_id] = PanopticMap(width, height, pixels, segments)

    logging.info(f'Loaded {len(images)} panoptic maps from "{json_path}".')

    manifest = DatasetManifest(
        images=images, categories=cats, split_name=data.get("split_name", split_name)
    )
    return manifest, maps


def _bbox(pmap, sid):
    box = pmap.bbox(sid)
    if box is None:
        return [0, 0, 0, 0]
    return [int(v) for v in box.as_tuple()]


def save_coco_panoptic(manifest, maps, json_path, png_dir):
    json_path, png_dir = Path(json_path), Path(png_dir)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    png_dir.mkdir(parents=True, exist_ok=True)

    images, annotations = [], []
    for img in manifest.images:
        pmap = maps[img.id]
        annotation = img.annotation or f"{img.id:012d}.png"

        Image.fromarray(id2rgb(pmap.pixels)).save(png_dir / annotation)

        images.append(
            {
                "id": img.id,
                "width": pmap.width,
                "height": pmap.height,
                "file_name": img.file_name,
            }
        )
        annotations.append(
            {
                "image_id": img.id,
                "file_name": annotation,
                "segments_info": [
                    {
                        "id": sid,
                        "category_id": seg.category_id,
                        "iscrowd": int(seg.iscrowd),
                        "area": seg.area,
                        "bbox": _bbox(pmap, sid),
                    }
                    for sid, seg in sorted(pmap.segments.items())
                ],
            }
        )

    data = {
        "split_name": manifest.split_name,
        "images": images,
        "annotations": annotations,
        "categories": [_category_to_json(c) for c in manifest.categories or []],
    }
    with open(json_path, "w") as f:
        json.dump(data, f, indent=2)

    logging.info(f'Saved {len(images)} panoptic maps to "{json_path}".')

    return json_path, png_dir
