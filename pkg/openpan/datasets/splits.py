import logging
import math
from dataclasses import replace
from enum import Enum
import numpy as np

from ..errors import SplitError, UnknownCategoryError
from ..types import VOID, Kind, PanopticMap, SplitSpec, Status
from .coco import DatasetManifest
from .registry import expand_split, get_split


class SplitRole(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


def resolve_unknown_ids(cats, spec):
    ids = []
    for name in expand_split(spec):
        try:
            c = cats.by_name(name)
        except UnknownCategoryError:
            raise SplitError(f'Split class "{name}" is not in the dataset.')
        if c.kind != Kind.THING:
            raise SplitError(f'Split class "{name}" is a stuff category.')
        ids.append(c.id)
    return ids


def _strip_segments(pmap, removed_ids):
    doomed = [sid for sid, seg in pmap.segments.items() if seg.category_id in removed_ids]
    if not doomed:
        return pmap

    pixels = np.where(np.isin(pmap.pixels, doomed), VOID, pmap.pixels)
    segments = {sid: seg for sid, seg in pmap.segments.items() if sid not in doomed}
    return PanopticMap(pmap.width, pmap.height, pixels, segments)


def build_open_set_split(manifest, maps, spec, role=SplitRole.TRAIN):
    """Turns the split's classes into unknowns.

    In the train role every segment of those classes is deleted and its
    pixels become void. In the eval role segments are kept and only the
    category status changes.
    """
    if not isinstance(spec, SplitSpec):
        spec = get_split(spec)
    role = SplitRole(role)

    removed = set(resolve_unknown_ids(manifest.categories, spec))
    cats = manifest.categories.with_status(removed, Status.UNKNOWN)

    if role == SplitRole.TRAIN:
        new_maps = {i: _strip_segments(m, removed) for i, m in maps.items()}
    else:
        new_maps = dict(maps)

    logging.info(
        f'Built split "{spec.name}" ({role.value}) with {len(removed)} unknown classes over {len(new_maps)} images.'
    )

    out = DatasetManifest(
        images=list(manifest.images),
        categories=cats,
        split_name=f"{spec.name}-{role.value}",
    )
    return out, new_maps


def void_fraction(box, pmap, cats=None):
    x0, y0 = max(0, math.floor(box.x)), max(0, math.floor(box.y))
    x1 = min(pmap.width, math.ceil(box.x + box.w))
    y1 = min(pmap.height, math.ceil(box.y + box.h))
    if x1 <= x0 or y1 <= y0:
        return 0.0

    patch = pmap.pixels[y0:y1, x0:x1]
    void = patch == VOID
    if cats is not None:
        void_ids = [sid for sid, s in pmap.segments.items() if cats.is_void(s.category_id)]
        void |= np.isin(patch, void_ids)
    return float(void.mean())


def label_void_proposals(records, gt_map, cats=None, min_fraction=0.5):
    """Sets `in_void` on each proposal whose box lies mostly on void."""
    out = []
    for r in records:
        in_void = void_fraction(r.box, gt_map, cats=cats) > min_fraction
        out.append(replace(r, in_void=in_void))
    return out
