from ..types import VOID
from .pq import IGNORE_FRACTION, MATCH_IOU, MatchResult, SegmentMatch, _check_shapes


def brute_force_match(gt, pred, cats, image_id=None):
    """Reference matcher that walks the pixel grids directly.

    Slow by construction. Used to produce expected reports for synthetic data
    and to cross-check :func:`match_segments`.
    """
    _check_shapes(gt, pred)

    gt_px = gt.pixels.tolist()
    pred_px = pred.pixels.tolist()
    H, W = gt.shape

    def _classes(pmap):
        return {
            sid: cats.eval_class(seg.category_id)
            for sid, seg in pmap.segments.items()
            if not cats.is_void(seg.category_id)
        }

    gt_classes, pred_classes = _classes(gt), _classes(pred)
    gt_crowd = {s for s, seg in gt.segments.items() if seg.iscrowd and s in gt_classes}

    def _is_gt_void(g):
        return g == VOID or g not in gt_classes

    matches = []
    for g, gc in sorted(gt_classes.items()):
        if g in gt_crowd:
            continue
        for p, pc in sorted(pred_classes.items()):
            if gc != pc:
                continue
            inter = union = 0
            for i in range(H):
                for j in range(W):
                    in_g = gt_px[i][j] == g
                    in_p = pred_px[i][j] == p
                    if in_g and in_p:
                        inter += 1
                    if in_g or (in_p and not _is_gt_void(gt_px[i][j])):
                        union += 1
            if inter == 0:
                continue
            iou = inter / union
            if iou > MATCH_IOU:
                matches.append(SegmentMatch(g, p, iou))

    matched_gt = {m.gt_id for m in matches}
    matched_pred = {m.pred_id for m in matches}

    unmatched_gt = tuple(
        g for g in sorted(gt_classes) if g not in matched_gt and g not in gt_crowd
    )

    unmatched_pred, ignored_pred = [], []
    for p in sorted(pred_classes):
        if p in matched_pred:
            continue
        area, covered = 0, 0
        for i in range(H):
            for j in range(W):
                if pred_px[i][j] != p:
                    continue
                area += 1
                g = gt_px[i][j]
                if _is_gt_void(g):
                    covered += 1
                elif g in gt_crowd and gt_classes[g] == pred_classes[p]:
                    covered += 1
        if area > 0 and covered / area > IGNORE_FRACTION:
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
