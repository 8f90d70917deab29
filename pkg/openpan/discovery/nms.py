from collections import defaultdict
import numpy as np

from ..random import get_rng
from .config import size_bucket


## NOTE: Keeps zero-objectness proposals drawable.
_MIN_WEIGHT = 1e-12


def _sort_key(r):
    return (-r.objectness, r.image_id, *r.box.as_tuple())


def _suppress(boxes, iou_thresh):
    """Greedy suppression over boxes already sorted by priority."""
    x1, y1 = boxes[:, 0], boxes[:, 1]
    x2, y2 = x1 + boxes[:, 2], y1 + boxes[:, 3]
    areas = boxes[:, 2] * boxes[:, 3]

    order = np.arange(len(boxes))
    keep = []
    while order.size > 0:
        i = order[0]
        keep.append(i)

        xx1 = np.maximum(x1[i], x1[order[1:]])
        yy1 = np.maximum(y1[i], y1[order[1:]])
        xx2 = np.minimum(x2[i], x2[order[1:]])
        yy2 = np.minimum(y2[i], y2[order[1:]])

        inter = np.maximum(0.0, xx2 - xx1) * np.maximum(0.0, yy2 - yy1)
        ovr = inter / (areas[i] + areas[order[1:]] - inter)

        order = order[1:][ovr <= iou_thresh]

    return keep


def dedup_nms(proposals, iou_thresh=1e-7):
    """Per-image greedy NMS by descending objectness.

    Ties are broken by image id and then box coordinates, so the output order
    is fully determined by the input set.
    """
    ordered = sorted(proposals, key=_sort_key)

    by_image = defaultdict(list)
    for idx, r in enumerate(ordered):
        by_image[r.image_id].append(idx)

    kept = set()
    for idxs in by_image.values():
        boxes = np.array(
            [ordered[i].box.as_tuple() for i in idxs], dtype=np.float64
        ).reshape(-1, 4)
        kept.update(idxs[k] for k in _suppress(boxes, iou_thresh))

    return [r for i, r in enumerate(ordered) if i in kept]


def is_eligible(record, min_area, sizes=None):
    if not record.in_void:
        return False
    area = record.box.area
    if area < min_area:
        return False
    return sizes is None or size_bucket(area) in sizes


def sample_proposals(proposals, n, min_area, rng=None, sizes=None):
    """Objectness-weighted draw of up to `n` void-region proposals, without replacement."""
    rng = get_rng(rng)

    eligible = [r for r in proposals if is_eligible(r, min_area, sizes=sizes)]
    m = min(n, len(eligible))
    if m == 0:
        return []

    weights = np.maximum(
        np.array([r.objectness for r in eligible], dtype=np.float64), _MIN_WEIGHT
    )
    idxs = rng.choice(len(eligible), size=m, replace=False, p=weights / weights.sum())

    return [eligible[i] for i in idxs]
