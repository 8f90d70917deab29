from .pq import (
    MATCH_IOU,
    IGNORE_FRACTION,
    SegmentMatch,
    MatchResult,
    intersect_histogram,
    match_segments,
    category_metrics,
    aggregate,
)
from .oracle import brute_force_match
from .report import (
    format_report,
    report_to_dict,
    report_from_dict,
    group_frame,
    category_frame,
)
from .utils import EvalConfig, evaluate_dataset


__all__ = [
    "MATCH_IOU",
    "IGNORE_FRACTION",
    "SegmentMatch",
    "MatchResult",
    "intersect_histogram",
    "match_segments",
    "category_metrics",
    "aggregate",
    "brute_force_match",
    "format_report",
    "report_to_dict",
    "report_from_dict",
    "group_frame",
    "category_frame",
    "EvalConfig",
    "evaluate_dataset",
]
