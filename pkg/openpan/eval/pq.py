import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Tuple
import numpy as np

from ..errors import AnnotationError, DimensionMismatchError
from ..types import (
    GROUPS,
    VOID,
    CategoryMetrics,
    GroupMetrics,
    MetricReport,
    group_members,
)


## NOTE: Segment ids are uint32, so a (gt, pred) pair packs into one uint64.
_SHIFT = np.uint64(32)
_MASK = np.uint64(0xFFFFFFFF)

MATCH_IOU = 0.5
IGNORE_FRACTION = 0.5


@dataclass(frozen=True)
class SegmentMatch:
    gt_id: int
    pred_id: int
    iou: float


@dataclass(frozen=True)
class MatchResult:
    image_id: object = None
    matches: Tuple[SegmentMatch, ...] = ()
    unmatched_gt: Tuple[int, ...] = ()
    unmatched_pred: Tuple[int, ...] = ()
    ignored_pred: Tuple[int, ...] = ()
    ## Evaluation class of every non-void segment, unknowns collapsed.
    gt_classes: Dict[int, int] = field(default_factory=dict)
    pred_classes: Dict[int, int] = field(default_factory=dict)


def _check_shapes(gt, pred):
    if gt.shape != pred.shape:
        raise DimensionMismatchError(
            f"Ground truth is {gt.height}x{gt.width} but prediction is {pred.height}x{pred.width}."
        )


def intersect_histogram(gt, pred):
    """Joint (gt_segment_id, pred_segment_id) pixel counts, void pairs included."""
    _check_shapes(gt, pred)

    combined = (gt.pixels.astype(np.uint64) << _SHIFT) | pred.pixels.astype(np.uint64)
    labels, counts = np.unique(combined, return_counts=True)

    gt_ids = (labels >> _SHIFT).tolist()
    pred_ids = (labels & _MASK).tolist()

    return {(g, p): int(c) for g, p, c in zip(gt_ids, pred_ids, counts.tolist())}


def _segment_classes(pmap, cats):
    void_ids = {VOID}
    classes = dict()
    for sid, seg in pmap.segments.items():
        ## Raises UnknownCategoryError for ids missing from the table.
        if cats.is_void(seg.category_id):
            void_ids.add(sid)
        else:
            classes[sid] = cats.eval_class(seg.category_id)
    return void_ids, classes


def match_segments(gt, pred, cats, image_id=None):
    _check_shapes(gt, pred)

    gt_void, gt_classes = _segment_classes(gt, cats)
    pred_void, pred_classes = _segment_classes(pred, cats)

    hist = intersect_histogram(gt, pred)

    gt_area, pred_area = defaultdict(int), defaultdict(int)
    for (g, p), n in hist.items():
        gt_area[g] += n
        pred_area[p] += n

    for side, area, table in (("gt", gt_area, gt.segments), ("pred", pred_area, pred.segments)):
        orphans = sorted(set(area) - set(table) - {VOID})
        if orphans:
            raise AnnotationError(
                f"{side} map has pixel ids without a segment entry: {orphans[:5]}."
            )

    gt_crowd = {sid for sid, seg in gt.segments.items() if seg.iscrowd and sid in gt_classes}

    ## Pixels of each prediction lying on GT void / same-class GT crowd.
    void_on_pred = defaultdict(int)
    crowd_on_pred = defaultdict(int)
    for (g, p), n in hist.items():
        if p not in pred_classes:
            continue
        if g in gt_void:
            void_on_pred[p] += n
        elif g in gt_crowd and gt_classes[g] == pred_classes[p]:
            crowd_on_pred[p] += n

    matches = []
    for (g, p), inter in hist.items():
        if g not in gt_classes or p not in pred_classes or g in gt_crowd:
            continue
        if gt_classes[g] != pred_classes[p]:
            continue
        union = pred_area[p] + gt_area[g] - inter - void_on_pred[p]
        iou = inter / union
        if iou > MATCH_IOU:
            matches.append(SegmentMatch(g, p, iou))

    matches.sort(key=lambda m: m.gt_id)
    matched_gt = {m.gt_id for m in matches}
    matched_pred = {m.pred_id for m in matches}

    unmatched_gt = tuple(
        sorted(g for g in gt_classes if g not in matched_gt and g not in gt_crowd)
    )

    unmatched_pred, ignored_pred = [], []
    for p in sorted(pred_classes):
        if p in matched_pred:
            continue
        area = pred_area[p]
        if area > 0 and (void_on_pred[p] + crowd_on_pred[p]) / area > IGNORE_FRACTION:
            ignored_pred.append(p)
        else:
            unmatched_pred.append(p)

    return MatchResult(
        image_id=image_id,
        matches=tuple(matches),
        unmatched_gt=unmatched_gt,
        unmatched_pred=tuple(unmatched_pred),
        ignored_pred=tuple(ignored_pred),
        gt_classes=gt_classes,
        pred_classes=pred_classes,
    )


def category_metrics(iou_sum, tp, fp, fn):
    denom = tp + 0.5 * fp + 0.5 * fn
    if denom == 0:
        return CategoryMetrics(iou_sum, tp, fp, fn)
    return CategoryMetrics(
        iou_sum=iou_sum,
        tp=tp,
        fp=fp,
        fn=fn,
        pq=iou_sum / denom,
        sq=iou_sum / tp if tp > 0 else 0.0,
        rq=tp / denom,
    )


def _image_key(result):
    return str(result.image_id)


def aggregate(results, cats):
    ious = defaultdict(list)
    counts = defaultdict(lambda: [0, 0, 0])

    ## NOTE: Sorted by image id and summed with fsum, so the result does not
    ## depend on the order results arrive in.
    for r in sorted(results, key=_image_key):
        for m in r.matches:
            c = r.gt_classes[m.gt_id]
            ious[c].append(m.iou)
            counts[c][0] += 1
        for p in r.unmatched_pred:
            counts[r.pred_classes[p]][1] += 1
        for g in r.unmatched_gt:
            counts[r.gt_classes[g]][2] += 1

    per_category = {
        c: category_metrics(math.fsum(ious[c]), tp, fp, fn)
        for c, (tp, fp, fn) in sorted(counts.items())
        if tp + fp + fn > 0
    }

    groups = dict()
    members = group_members(cats)
    for name in GROUPS:
        stats = [per_category[c] for c in members[name] if c in per_category]
        n = len(stats)
        if n == 0:
            groups[name] = GroupMetrics()
            continue
        groups[name] = GroupMetrics(
            pq=math.fsum(s.pq for s in stats) / n,
            sq=math.fsum(s.sq for s in stats) / n,
            rq=math.fsum(s.rq for s in stats) / n,
            n=n,
        )

    return MetricReport(per_category=per_category, groups=groups)
