from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple
import numpy as np

from .errors import CategoryTableError, UnknownCategoryError


VOID = 0

## NOTE: Reported id of the single evaluation-time unknown class.
UNKNOWN_CATEGORY_ID = -1

GROUPS = ("All-Known", "Known-Th", "Known-St", "Unknown")


class Kind(str, Enum):
    THING = "thing"
    STUFF = "stuff"


class Status(str, Enum):
    KNOWN = "known"
    UNKNOWN = "unknown"
    VOID = "void"


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    kind: Kind
    status: Status = Status.KNOWN

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "status", Status(self.status))


class CategoryTable:
    """Known / unknown / void status and thing / stuff kind of every category.

    Several unknown entries may coexist (e.g. classes found by discovery);
    evaluation collapses all of them into :data:`UNKNOWN_CATEGORY_ID`.
    """

    def __init__(self, entries):
        entries = tuple(entries)

        by_id = dict()
        for c in entries:
            if not isinstance(c.id, (int, np.integer)) or c.id < 0:
                raise CategoryTableError(f"Invalid category id {c.id!r}.")
            if c.id in by_id:
                raise CategoryTableError(f"Duplicate category id {c.id}.")
            if c.status == Status.UNKNOWN and c.kind != Kind.THING:
                raise CategoryTableError(
                    f'Unknown category "{c.name}" ({c.id}) must be a thing.'
                )
            by_id[int(c.id)] = c

        voids = [c for c in entries if c.status == Status.VOID]
        if len(voids) != 1:
            raise CategoryTableError(
                f"Expected exactly one void entry, found {len(voids)}."
            )

        self.entries = entries
        self._by_id = by_id
        self.void_id = voids[0].id

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, category_id):
        return category_id in self._by_id

    def __getitem__(self, category_id):
        try:
            return self._by_id[category_id]
        except KeyError:
            raise UnknownCategoryError(f"Unknown category id {category_id}.")

    def __eq__(self, other):
        return isinstance(other, CategoryTable) and self.entries == other.entries

    def by_name(self, name):
        for c in self.entries:
            if c.name == name:
                return c
        raise UnknownCategoryError(f'Unknown category name "{name}".')

    def known_things(self):
        return [
            c for c in self.entries if c.status == Status.KNOWN and c.kind == Kind.THING
        ]

    def known_stuff(self):
        return [
            c for c in self.entries if c.status == Status.KNOWN and c.kind == Kind.STUFF
        ]

    def unknowns(self):
        return [c for c in self.entries if c.status == Status.UNKNOWN]

    def with_status(self, category_ids, status):
        category_ids = set(category_ids)
        return CategoryTable(
            Category(c.id, c.name, c.kind, status) if c.id in category_ids else c
            for c in self.entries
        )

    def with_unknowns(self, n, prefix="unknown"):
        """Extends the table with `n` fresh unknown thing entries."""
        start = max(self._by_id) + 1
        return CategoryTable(
            [
                *self.entries,
                *[
                    Category(start + i, f"{prefix}_{i}", Kind.THING, Status.UNKNOWN)
                    for i in range(n)
                ],
            ]
        )

    def is_void(self, category_id):
        return self[category_id].status == Status.VOID

    def eval_class(self, category_id):
        c = self[category_id]
        if c.status == Status.UNKNOWN:
            return UNKNOWN_CATEGORY_ID
        return c.id


@dataclass(frozen=True)
class Segment:
    category_id: int
    iscrowd: bool = False
    area: int = 0


@dataclass(frozen=True, eq=False)
class PanopticMap:
    """Per-pixel segment ids (row-major, 0 is void) plus the segment table."""

    width: int
    height: int
    pixels: np.ndarray
    segments: Dict[int, Segment] = field(default_factory=dict)

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.shape != (self.height, self.width):
            raise ValueError(
                f"Pixel grid shape {pixels.shape} does not match {self.height}x{self.width}."
            )
        pixels = pixels.astype(np.uint32, copy=True)
        pixels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(
            self, "segments", {int(k): v for k, v in self.segments.items()}
        )

    @property
    def shape(self):
        return (self.height, self.width)

    @staticmethod
    def from_pixels(pixels, categories, crowd_ids=()):
        """Builds a map whose areas are counted from `pixels`.

        `categories` maps every non-zero segment id to its category id.
        """
        pixels = np.asarray(pixels)
        ids, counts = np.unique(pixels, return_counts=True)
        crowd_ids = set(crowd_ids)
        segments = {
            int(i): Segment(
                category_id=int(categories[int(i)]),
                iscrowd=int(i) in crowd_ids,
                area=int(n),
            )
            for i, n in zip(ids, counts)
            if i != VOID
        }
        return PanopticMap(
            width=pixels.shape[1], height=pixels.shape[0], pixels=pixels, segments=segments
        )

    def bbox(self, segment_id):
        rows, cols = np.nonzero(self.pixels == segment_id)
        if rows.size == 0:
            return None
        return BoundingBox(
            float(cols.min()),
            float(rows.min()),
            float(cols.max() - cols.min() + 1),
            float(rows.max() - rows.min() + 1),
        )

    def void_area(self):
        return int((self.pixels == VOID).sum())


@dataclass(frozen=True)
class Violation:
    kind: str
    segment_id: int
    detail: str = ""


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self):
        return len(self.violations) == 0

    def __bool__(self):
        return self.ok


def validate_map(pmap, cats):
    violations = []

    ids, counts = np.unique(pmap.pixels, return_counts=True)
    counted = {int(i): int(n) for i, n in zip(ids, counts) if i != VOID}

    for sid, n in counted.items():
        if sid not in pmap.segments:
            violations.append(
                Violation("orphan segment", sid, f"{n} pixels without a table entry")
            )

    for sid, seg in sorted(pmap.segments.items()):
        if sid == VOID:
            violations.append(Violation("reserved id", sid, "id 0 is reserved for void"))
            continue
        if seg.category_id not in cats:
            violations.append(
                Violation("unknown category", sid, f"category {seg.category_id}")
            )
        if seg.area < 1:
            violations.append(Violation("empty segment", sid, f"area {seg.area}"))
        if counted.get(sid, 0) != seg.area:
            violations.append(
                Violation(
                    "area mismatch",
                    sid,
                    f"table says {seg.area}, grid has {counted.get(sid, 0)}",
                )
            )

    return ValidationResult(tuple(violations))


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box [x, x + w) x [y, y + h)."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"Box extent must be positive, got w={self.w}, h={self.h}.")

    @property
    def area(self):
        return self.w * self.h

    def as_tuple(self):
        return (self.x, self.y, self.w, self.h)


def box_iou(a, b):
    iw = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    ih = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return float(inter / (a.area + b.area - inter))


@dataclass(frozen=True)
class CategoryMetrics:
    iou_sum: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    pq: float = 0.0
    sq: float = 0.0
    rq: float = 0.0


@dataclass(frozen=True)
class GroupMetrics:
    pq: float = 0.0
    sq: float = 0.0
    rq: float = 0.0
    n: int = 0


@dataclass(frozen=True)
class MetricReport:
    per_category: Dict[int, CategoryMetrics] = field(default_factory=dict)
    groups: Dict[str, GroupMetrics] = field(default_factory=dict)


@dataclass(frozen=True)
class SplitSpec:
    name: str
    unknown_class_names: Tuple[str, ...] = ()
    cumulative_base: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "unknown_class_names", tuple(self.unknown_class_names))


def group_members(cats):
    """Evaluation classes of every reporting group."""
    known_th = [c.id for c in cats.known_things()]
    known_st = [c.id for c in cats.known_stuff()]
    return {
        "All-Known": known_th + known_st,
        "Known-Th": known_th,
        "Known-St": known_st,
        "Unknown": [UNKNOWN_CATEGORY_ID],
    }


__all__ = [
    "VOID",
    "UNKNOWN_CATEGORY_ID",
    "GROUPS",
    "Kind",
    "Status",
    "Category",
    "CategoryTable",
    "Segment",
    "PanopticMap",
    "Violation",
    "ValidationResult",
    "validate_map",
    "BoundingBox",
    "box_iou",
    "CategoryMetrics",
    "GroupMetrics",
    "MetricReport",
    "SplitSpec",
    "group_members",
]
