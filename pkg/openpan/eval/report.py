from dataclasses import asdict
import pandas as pd

from ..types import (
    GROUPS,
    UNKNOWN_CATEGORY_ID,
    CategoryMetrics,
    GroupMetrics,
    MetricReport,
)


def report_to_dict(report):
    return {
        "per_category": {
            str(c): asdict(m) for c, m in sorted(report.per_category.items())
        },
        "groups": {name: asdict(report.groups[name]) for name in GROUPS if name in report.groups},
    }


def report_from_dict(data):
    return MetricReport(
        per_category={
            int(c): CategoryMetrics(**m) for c, m in data.get("per_category", {}).items()
        },
        groups={name: GroupMetrics(**m) for name, m in data.get("groups", {}).items()},
    )


def group_frame(report):
    """One-row frame with (group, metric) columns, values in percent."""
    columns = pd.MultiIndex.from_product([GROUPS, ["PQ", "SQ", "RQ"]])
    values = []
    for name in GROUPS:
        g = report.groups.get(name, GroupMetrics())
        values += [100 * g.pq, 100 * g.sq, 100 * g.rq]
    return pd.DataFrame([values], columns=columns).round(1)


def category_frame(report, cats=None):
    rows = []
    for c, m in sorted(report.per_category.items()):
        if c == UNKNOWN_CATEGORY_ID:
            name = "unknown"
        elif cats is not None and c in cats:
            name = cats[c].name
        else:
            name = str(c)
        rows.append(
            {
                "category_id": c,
                "name": name,
                "PQ": 100 * m.pq,
                "SQ": 100 * m.sq,
                "RQ": 100 * m.rq,
                "TP": m.tp,
                "FP": m.fp,
                "FN": m.fn,
            }
        )
    frame = pd.DataFrame(
        rows, columns=["category_id", "name", "PQ", "SQ", "RQ", "TP", "FP", "FN"]
    )
    return frame.round({"PQ": 1, "SQ": 1, "RQ": 1})


def format_report(report, cats=None, per_category=True):
    with pd.option_context("display.float_format", "{:.1f}".format):
        text = group_frame(report).to_string(index=False)
        if per_category and report.per_category:
            text += "\n\n" + category_frame(report, cats=cats).to_string(index=False)
    return text
