import logging
from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigError, DimensionMismatchError, FusionError
from .types import VOID, PanopticMap


@dataclass
class FusionConfig:
    overlap_keep_fraction: float = field(default=0.5)
    stuff_area_min: int = field(default=4096)
    ## Unknowns may cover stuff pixels (never known things).
    unknown_on_stuff: bool = field(default=False)
    unknown_score_threshold: float = field(default=0.5)

    def __post_init__(self):
        if not 0 <= self.overlap_keep_fraction <= 1:
            raise ConfigError(
                f"overlap_keep_fraction must be in [0, 1], got {self.overlap_keep_fraction}."
            )
        if self.stuff_area_min < 0:
            raise ConfigError(f"stuff_area_min must be >= 0, got {self.stuff_area_min}.")


@dataclass(eq=False)
class InstancePrediction:
    mask: np.ndarray
    category_id: int
    confidence: float

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise FusionError(f"Instance mask must be 2-D, got shape {self.mask.shape}.")
        if not self.mask.any():
            raise FusionError(f"Empty mask for category {self.category_id}.")
        if not 0.0 <= self.confidence <= 1.0:
            raise FusionError(f"Confidence {self.confidence} outside [0, 1].")

    @property
    def area(self):
        return int(self.mask.sum())

    def centroid(self):
        rows, cols = np.nonzero(self.mask)
        return (float(rows.mean()), float(cols.mean()))

    @staticmethod
    def from_rle(rle, category_id, confidence):
        return InstancePrediction(decode_rle(rle), category_id, confidence)


def encode_rle(mask):
    """Uncompressed COCO RLE; counts alternate runs of 0 and 1 in column-major order."""
    mask = np.asarray(mask, dtype=bool)
    flat = mask.flatten(order="F").astype(np.int8)

    changes = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        counts = [0] + counts

    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def decode_rle(rle):
    h, w = rle["size"]
    counts = rle["counts"]
    if isinstance(counts, (str, bytes)):
        raise FusionError("Compressed RLE strings are not supported.")
    if sum(counts) != h * w:
        raise FusionError(f"RLE counts sum to {sum(counts)}, expected {h * w}.")

    values = np.arange(len(counts)) % 2
    flat = np.repeat(values, counts).astype(bool)
    return flat.reshape((h, w), order="F")


def select_unknown_instances(candidates, score_threshold=0.5):
    return [c for c in candidates if c.confidence > score_threshold]


def _paint_key(inst):
    return (-inst.confidence, inst.category_id, inst.centroid())


def _paint(instances, pixels, categories, paintable, keep_fraction, next_id):
    for inst in sorted(instances, key=_paint_key):
        region = inst.mask & paintable(pixels)
        kept = int(region.sum())
        if kept == 0 or kept / inst.area < keep_fraction:
            continue
        pixels[region] = next_id
        categories[next_id] = inst.category_id
        next_id += 1
    return next_id


def fuse_panoptic(known_instances, unknown_instances, semantic, cfg=None):
    """Panoptic map from instance masks and a stuff semantic map.

    Known instances are painted by descending confidence without overwriting,
    stuff fills what is left (small stuff regions stay void), and unknown
    instances are painted last on void only.
    """
    cfg = cfg or FusionConfig()

    semantic = np.asarray(semantic)
    if semantic.ndim != 2:
        raise FusionError(f"Semantic map must be 2-D, got shape {semantic.shape}.")
    for inst in [*known_instances, *unknown_instances]:
        if inst.mask.shape != semantic.shape:
            raise DimensionMismatchError(
                f"Instance mask {inst.mask.shape} does not match semantic map {semantic.shape}."
            )

    pixels = np.zeros(semantic.shape, dtype=np.uint32)
    categories = dict()

    next_id = _paint(
        known_instances,
        pixels,
        categories,
        lambda px: px == VOID,
        cfg.overlap_keep_fraction,
        1,
    )

    stuff_ids = set()
    for stuff in sorted(int(s) for s in np.unique(semantic) if s != VOID):
        region = (semantic == stuff) & (pixels == VOID)
        if region.sum() < cfg.stuff_area_min:
            continue
        pixels[region] = next_id
        categories[next_id] = stuff
        stuff_ids.add(next_id)
        next_id += 1

    if cfg.unknown_on_stuff:
        stuff_list = sorted(stuff_ids)
        paintable = lambda px: (px == VOID) | np.isin(px, stuff_list)
    else:
        paintable = lambda px: px == VOID

    _paint(
        unknown_instances,
        pixels,
        categories,
        paintable,
        cfg.overlap_keep_fraction,
        next_id,
    )

    present = set(np.unique(pixels).tolist()) - {VOID}
    fused = PanopticMap.from_pixels(
        pixels, {sid: c for sid, c in categories.items() if sid in present}
    )

    logging.debug(
        f"Fused {len(fused.segments)} segments ({len(categories) - len(present)} emptied)."
    )

    return fused
