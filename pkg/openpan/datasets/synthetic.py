import logging
from dataclasses import dataclass, field
from typing import Dict, Tuple
import numpy as np
from scipy import ndimage
from sklearn.preprocessing import normalize

from ..discovery.records import DEFAULT_FEATURE_DIM, ProposalRecord
from ..errors import ConfigError, SynthesisError
from ..eval.oracle import brute_force_match
from ..eval.pq import aggregate
from ..random import get_rng
from ..types import (
    VOID,
    BoundingBox,
    Category,
    CategoryTable,
    Kind,
    MetricReport,
    PanopticMap,
    Segment,
    Status,
)


MAX_RETRIES = 1000


@dataclass
class SynthConfig:
    n_planted_classes: int = field(default=8)
    points_per_class: int = field(default=500)
    distractor_fraction: float = field(default=0.4)
    intra_class_cos_dist_max: float = field(default=0.05)
    inter_class_cos_dist_min: float = field(default=0.3)
    planted_objectness: Tuple[float, float] = field(default=(0.92, 1.0))
    distractor_objectness: Tuple[float, float] = field(default=(0.0, 0.5))
    feature_dim: int = field(default=DEFAULT_FEATURE_DIM)

    boxes_per_image: int = field(default=20)
    box_size: int = field(default=48)
    grid_stride: int = field(default=64)
    grid_columns: int = field(default=5)
    images_per_step: int = field(default=1)

    n_images: int = field(default=20)
    image_height: int = field(default=32)
    image_width: int = field(default=32)
    max_things: int = field(default=5)
    crowd_prob: float = field(default=0.1)
    erosion_prob: float = field(default=0.0)
    flip_prob: float = field(default=0.0)
    drop_prob: float = field(default=0.0)

    rng_seed: int = field(default=0)

    def __post_init__(self):
        self.planted_objectness = tuple(self.planted_objectness)
        self.distractor_objectness = tuple(self.distractor_objectness)

        if not 0 <= self.intra_class_cos_dist_max < self.inter_class_cos_dist_min <= 2:
            raise ConfigError(
                "Expected 0 <= intra_class_cos_dist_max < inter_class_cos_dist_min <= 2."
            )
        for name in [
            "distractor_fraction",
            "crowd_prob",
            "erosion_prob",
            "flip_prob",
            "drop_prob",
        ]:
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}.")
        for name in ["planted_objectness", "distractor_objectness"]:
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi <= 1:
                raise ConfigError(f"{name} must be a range within [0, 1], got {(lo, hi)}.")
        if self.boxes_per_image > self.grid_columns * self.grid_columns:
            raise ConfigError("boxes_per_image exceeds the box grid.")
        if self.box_size > self.grid_stride:
            raise ConfigError("box_size must not exceed grid_stride.")


def _planted_centers(cfg, rng):
    n, D = cfg.n_planted_classes, cfg.feature_dim
    if n == 0:
        return np.zeros((0, D))

    ## A point lies within half the intra-class angle of its center, so centers
    ## need the inter-class angle plus a full intra-class angle between them.
    intra_angle = np.arccos(1.0 - cfg.intra_class_cos_dist_max)
    min_angle = np.arccos(1.0 - cfg.inter_class_cos_dist_min) + intra_angle
    if min_angle > np.pi:
        raise SynthesisError("Separation constraints cannot be met on the sphere.")

    for _ in range(MAX_RETRIES):
        centers = normalize(rng.standard_normal((n, D)))
        cos = np.clip(centers @ centers.T, -1.0, 1.0)
        angles = np.arccos(cos[np.triu_indices(n, k=1)])
        if angles.size == 0 or angles.min() >= min_angle:
            return centers

    raise SynthesisError(
        f"Could not place {n} centers {min_angle:.3f} rad apart in {D} dimensions after {MAX_RETRIES} tries."
    )


def _cap_points(center, n, max_angle, rng):
    theta = rng.uniform(0.0, max_angle, size=n)
    u = rng.standard_normal((n, center.shape[0]))
    u -= np.outer(u @ center, center)
    u = normalize(u)
    return np.cos(theta)[:, None] * center[None] + np.sin(theta)[:, None] * u


def _grid_box(slot, cfg):
    col, row = slot % cfg.grid_columns, slot // cfg.grid_columns
    return BoundingBox(
        float(col * cfg.grid_stride),
        float(row * cfg.grid_stride),
        float(cfg.box_size),
        float(cfg.box_size),
    )


def generate_synthetic_features(cfg=None):
    """Planted unit-sphere clusters mixed with uniform distractors.

    Returns the shuffled proposal records (one image per `boxes_per_image`
    records, boxes on a non-overlapping grid) and the planted label of every
    record key, `-1` for distractors.
    """
    cfg = cfg or SynthConfig()
    rng = get_rng(cfg.rng_seed)

    f = cfg.distractor_fraction
    if f >= 1.0:
        n_planted_total = 0
        n_distractors = cfg.n_planted_classes * cfg.points_per_class
    else:
        n_planted_total = cfg.n_planted_classes * cfg.points_per_class
        n_distractors = int(round(n_planted_total * f / (1.0 - f)))

    features, labels = [], []
    if n_planted_total > 0:
        centers = _planted_centers(cfg, rng)
        max_angle = np.arccos(1.0 - cfg.intra_class_cos_dist_max) / 2.0
        for c, center in enumerate(centers):
            features.append(_cap_points(center, cfg.points_per_class, max_angle, rng))
            labels += [c] * cfg.points_per_class

    if n_distractors > 0:
        features.append(normalize(rng.standard_normal((n_distractors, cfg.feature_dim))))
    else:
        features.append(np.zeros((0, cfg.feature_dim)))
    labels += [-1] * n_distractors

    features = np.concatenate(features).astype(np.float32)
    labels = np.array(labels, dtype=np.int64)

    objectness = np.where(
        labels >= 0,
        rng.uniform(*cfg.planted_objectness, size=len(labels)),
        rng.uniform(*cfg.distractor_objectness, size=len(labels)),
    ).astype(np.float32)

    order = rng.permutation(len(labels))

    records, assignments = [], dict()
    for i, j in enumerate(order):
        r = ProposalRecord(
            image_id=i // cfg.boxes_per_image,
            box=_grid_box(i % cfg.boxes_per_image, cfg),
            objectness=float(objectness[j]),
            feature=features[j],
            in_void=True,
        )
        records.append(r)
        assignments[r.key] = int(labels[j])

    logging.info(
        f"Generated {n_planted_total} planted and {n_distractors} distractor proposals."
    )

    return records, assignments


def synthetic_categories():
    return CategoryTable(
        [
            Category(VOID, "void", Kind.STUFF, Status.VOID),
            Category(1, "person", Kind.THING),
            Category(2, "car", Kind.THING),
            Category(3, "dog", Kind.THING),
            Category(4, "cow", Kind.THING, Status.UNKNOWN),
            Category(5, "pizza", Kind.THING, Status.UNKNOWN),
            Category(6, "sky", Kind.STUFF),
            Category(7, "grass", Kind.STUFF),
        ]
    )


def _random_gt(cats, cfg, rng):
    H, W = cfg.image_height, cfg.image_width
    stuff = [c.id for c in cats.known_stuff()]
    things = [c.id for c in cats.known_things()] + [c.id for c in cats.unknowns()]

    pixels = np.zeros((H, W), dtype=np.uint32)
    categories, crowd = dict(), set()

    ## Stuff bands, with a void strip at the bottom.
    split = int(rng.integers(1, H - 1))
    pixels[:split] = 1
    pixels[split : H - 2] = 2
    categories[1], categories[2] = stuff[0], stuff[1 % len(stuff)]

    sid = 3
    for _ in range(int(rng.integers(1, cfg.max_things + 1))):
        h, w = int(rng.integers(3, H // 2)), int(rng.integers(3, W // 2))
        y, x = int(rng.integers(0, H - h)), int(rng.integers(0, W - w))
        pixels[y : y + h, x : x + w] = sid
        categories[sid] = int(rng.choice(things))
        if rng.random() < cfg.crowd_prob:
            crowd.add(sid)
        sid += 1

    present = set(np.unique(pixels).tolist()) - {VOID}
    return PanopticMap.from_pixels(
        pixels,
        {k: v for k, v in categories.items() if k in present},
        crowd_ids=crowd & present,
    )


def _perturb(gt, cats, cfg, rng):
    pixels = np.array(gt.pixels)
    categories = {sid: seg.category_id for sid, seg in gt.segments.items()}

    for sid, seg in sorted(gt.segments.items()):
        mask = gt.pixels == sid
        if rng.random() < cfg.drop_prob:
            pixels[mask] = VOID
            continue
        if rng.random() < cfg.erosion_prob:
            pixels[mask & ~ndimage.binary_erosion(mask)] = VOID
        if rng.random() < cfg.flip_prob:
            c = cats[seg.category_id]
            same_kind = [
                o.id
                for o in cats
                if o.kind == c.kind and o.status != Status.VOID and o.id != c.id
            ]
            if same_kind:
                categories[sid] = int(rng.choice(same_kind))

    present = set(np.unique(pixels).tolist()) - {VOID}
    return PanopticMap.from_pixels(
        pixels, {k: v for k, v in categories.items() if k in present}
    )


@dataclass
class SyntheticPanoptic:
    categories: CategoryTable
    gts: Dict[int, PanopticMap]
    preds: Dict[int, PanopticMap]
    expected: MetricReport


def generate_synthetic_panoptic(cfg=None, cats=None):
    """Random ground truth plus predictions derived by erosion, class flips and drops.

    The expected report is computed with the pixel-loop matcher.
    """
    cfg = cfg or SynthConfig()
    cats = cats or synthetic_categories()
    rng = get_rng(cfg.rng_seed)

    gts, preds = dict(), dict()
    for image_id in range(cfg.n_images):
        gts[image_id] = _random_gt(cats, cfg, rng)
        preds[image_id] = _perturb(gts[image_id], cats, cfg, rng)

    expected = aggregate(
        [brute_force_match(gts[i], preds[i], cats, image_id=i) for i in gts], cats
    )

    return SyntheticPanoptic(categories=cats, gts=gts, preds=preds, expected=expected)
