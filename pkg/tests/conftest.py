import numpy as np
import pytest

from openpan.discovery import ProposalRecord
from openpan.types import (
    VOID,
    BoundingBox,
    Category,
    CategoryTable,
    Kind,
    PanopticMap,
    Status,
)


## Thing classes used by the split presets, plus a few that stay known.
COCO_THINGS = [
    "person",
    "car",
    "cow",
    "pizza",
    "toilet",
    "boat",
    "tie",
    "zebra",
    "stop sign",
    "dining table",
    "banana",
    "bicycle",
    "cake",
    "sink",
    "cat",
    "keyboard",
    "bear",
    "dog",
]
COCO_STUFF = ["sky", "grass"]


@pytest.fixture(autouse=True)
def _offline_wandb(monkeypatch, tmp_path):
    monkeypatch.setenv("WANDB_MODE", "disabled")
    monkeypatch.setenv("WANDB_SILENT", "true")
    ## Runs without --out log under PROJECT_HOME.
    monkeypatch.setenv("PROJECT_HOME", str(tmp_path / "home"))


@pytest.fixture
def cats():
    return CategoryTable(
        [
            Category(VOID, "void", Kind.STUFF, Status.VOID),
            Category(1, "person", Kind.THING),
            Category(2, "car", Kind.THING),
            Category(3, "sky", Kind.STUFF),
            Category(4, "cow", Kind.THING, Status.UNKNOWN),
            Category(5, "pizza", Kind.THING, Status.UNKNOWN),
        ]
    )


@pytest.fixture
def coco_cats():
    entries = [Category(VOID, "void", Kind.STUFF, Status.VOID)]
    entries += [Category(i + 1, n, Kind.THING) for i, n in enumerate(COCO_THINGS)]
    entries += [Category(100 + i, n, Kind.STUFF) for i, n in enumerate(COCO_STUFF)]
    return CategoryTable(entries)


def make_map(pixels, categories, crowd_ids=()):
    return PanopticMap.from_pixels(
        np.asarray(pixels, dtype=np.uint32), categories, crowd_ids=crowd_ids
    )


def paint_rectangles(rng, H, W, n, first_id=1):
    pixels = np.zeros((H, W), dtype=np.uint32)
    for sid in range(first_id, first_id + n):
        h, w = int(rng.integers(1, H + 1)), int(rng.integers(1, W + 1))
        y, x = int(rng.integers(0, H - h + 1)), int(rng.integers(0, W - w + 1))
        pixels[y : y + h, x : x + w] = sid
    return pixels


def _finish(pixels, pick_category, rng, crowd_prob):
    present = sorted(set(np.unique(pixels).tolist()) - {VOID})
    categories = {sid: pick_category(sid) for sid in present}
    crowd = {sid for sid in present if rng.random() < crowd_prob}
    return make_map(pixels, categories, crowd_ids=crowd)


def random_pair(rng, cats, max_size=16, max_segments=6):
    """Random (gt, pred) pair with overlapping segments, crowd and void regions."""
    H, W = int(rng.integers(2, max_size + 1)), int(rng.integers(2, max_size + 1))
    cat_ids = [c.id for c in cats]

    gt_px = paint_rectangles(rng, H, W, int(rng.integers(0, max_segments + 1)))
    gt_cats = {sid: int(rng.choice(cat_ids)) for sid in range(1, max_segments + 1)}
    gt = _finish(gt_px, gt_cats.get, rng, crowd_prob=0.15)

    if rng.random() < 0.7:
        pred_px = gt_px.copy()
        extra = paint_rectangles(rng, H, W, int(rng.integers(0, 3)), first_id=max_segments + 1)
        pred_px = np.where(extra > 0, extra, pred_px)
        if rng.random() < 0.3:
            y, x = int(rng.integers(0, H)), int(rng.integers(0, W))
            pred_px[y:, x:] = VOID
    else:
        pred_px = paint_rectangles(rng, H, W, int(rng.integers(0, max_segments + 1)))

    def pred_category(sid):
        if sid in gt_cats and rng.random() < 0.8:
            return gt_cats[sid]
        return int(rng.choice(cat_ids))

    pred = _finish(pred_px, pred_category, rng, crowd_prob=0.0)
    return gt, pred


def make_record(image_id=0, box=(0, 0, 48, 48), objectness=0.9, feature=None, in_void=True):
    if feature is None:
        feature = np.ones(4)
    return ProposalRecord(
        image_id=image_id,
        box=BoundingBox(*box),
        objectness=objectness,
        feature=np.asarray(feature, dtype=np.float64),
        in_void=in_void,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(42)
