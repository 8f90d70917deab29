import copy
import logging
import math
from dataclasses import dataclass
import numpy as np
from sklearn.preprocessing import normalize

from ..errors import DimensionMismatchError, ProviderError
from .config import EngineConfig


CLUSTER = "cluster"
MINED = "mined"


def _unit(v):
    return normalize(np.asarray(v, dtype=np.float64).reshape(1, -1))[0]


@dataclass
class Exemplar:
    record: object
    feature: np.ndarray
    source: str = CLUSTER
    step: int = -1


@dataclass(frozen=True)
class PseudoLabel:
    image_id: int
    box: object
    class_id: int
    source: str


@dataclass
class ClusterReport:
    centroid: np.ndarray
    members: np.ndarray
    avg_cos_similarity: float
    avg_objectness: float


class ExemplarStore:
    """Discovered unknown classes and the thresholds of the current round.

    Class ids are handed out in increasing order starting at `first_class_id`
    and are never reused.
    """

    def __init__(self, cfg=None, first_class_id=1):
        cfg = cfg or EngineConfig()

        self.classes = dict()
        self.found_class_count = 0
        self.current_objectness_threshold = cfg.objectness_threshold(0)
        self.current_mining_distance = cfg.mining_distance(0)

        self._next_id = first_class_id
        self._cache = None

    def __len__(self):
        return len(self.classes)

    def __contains__(self, class_id):
        return class_id in self.classes

    @property
    def n_exemplars(self):
        return sum(len(v) for v in self.classes.values())

    @property
    def dim(self):
        for exemplars in self.classes.values():
            if exemplars:
                return exemplars[0].feature.shape[0]
        return None

    def new_class(self, exemplars):
        class_id = self._next_id
        self._next_id += 1
        self.classes[class_id] = list(exemplars)
        self._cache = None
        return class_id

    def add(self, class_id, exemplars):
        self.classes[class_id].extend(exemplars)
        self._cache = None

    def advance(self, cfg):
        """Moves both thresholds along their ramps, never backwards."""
        self.found_class_count = len(self.classes)
        self.current_objectness_threshold = max(
            self.current_objectness_threshold,
            cfg.objectness_threshold(self.found_class_count),
        )
        self.current_mining_distance = min(
            self.current_mining_distance,
            cfg.mining_distance(self.found_class_count),
        )

    def matrix(self):
        """Stacked exemplar features, grouped by ascending class id.

        Returns `(features, class_ids, offsets)` where `offsets[i]` is the first
        row of `class_ids[i]`.
        """
        if self._cache is None:
            ids = sorted(c for c, v in self.classes.items() if v)
            feats, offsets, start = [], [], 0
            for c in ids:
                offsets.append(start)
                feats.extend(e.feature for e in self.classes[c])
                start += len(self.classes[c])
            self._cache = (
                np.stack(feats) if feats else np.zeros((0, 0)),
                np.array(ids, dtype=np.int64),
                np.array(offsets, dtype=np.int64),
            )
        return self._cache

    def invalidate(self):
        self._cache = None

    def snapshot(self):
        return copy.deepcopy(self)

    def pseudo_labels(self):
        return [
            PseudoLabel(e.record.image_id, e.record.box, class_id, e.source)
            for class_id, exemplars in sorted(self.classes.items())
            for e in exemplars
        ]


def cluster_reports(records, features, result):
    """Per-cluster tightness and objectness for one k-means round.

    `features` must be the unit-normalized rows that were clustered.
    """
    objectness = np.array([r.objectness for r in records], dtype=np.float64)

    reports = []
    for j, centroid in enumerate(result.centroids):
        members = np.flatnonzero(result.assignments == j)
        if members.size == 0:
            continue
        sims = features[members] @ centroid
        reports.append(
            ClusterReport(
                centroid=centroid,
                members=members,
                avg_cos_similarity=float(np.mean(sims)),
                avg_objectness=float(np.mean(objectness[members])),
            )
        )
    return reports


def _n_top(fraction, n):
    return min(n, math.ceil(round(fraction * n, 9)))


def select_unknown_clusters(reports, store, cfg, records, features, step=-1):
    """Founds a new unknown class for every tight, object-like cluster.

    Only the `ceil(top_cluster_fraction * k_clusters)` clusters with the highest
    average cosine similarity are considered, fewer if k-means returned fewer.
    Members further than `membership_cos_dist` from their centroid are not
    stored. Report member indices point into `records` and the unit-normalized
    `features`.
    """
    n_top = min(len(reports), _n_top(cfg.top_cluster_fraction, cfg.k_clusters))
    ranked = sorted(
        range(len(reports)), key=lambda i: -reports[i].avg_cos_similarity
    )[:n_top]

    threshold = store.current_objectness_threshold

    created = []
    for i in ranked:
        rep = reports[i]
        if rep.avg_objectness < threshold:
            continue

        dist = 1.0 - features[rep.members] @ rep.centroid
        keep = rep.members[dist <= cfg.membership_cos_dist]
        if keep.size == 0:
            continue

        class_id = store.new_class(
            Exemplar(records[m], features[m], source=CLUSTER, step=step) for m in keep
        )
        created.append(class_id)

        logging.debug(
            f"Unknown class {class_id}: {keep.size} exemplars, "
            f"cos-sim {rep.avg_cos_similarity:.3f}, objectness {rep.avg_objectness:.3f}."
        )

    store.advance(cfg)

    return created


def mine_exemplars(proposals, store, step=-1):
    """Admits proposals lying close enough to an existing exemplar.

    Every proposal is compared against the store as it was on entry; the
    accepted ones are appended afterwards. Returns `(record, class_id,
    distance)` triples in input order.
    """
    if len(store) == 0 or len(proposals) == 0:
        return []

    E, class_ids, offsets = store.matrix()

    X = np.stack([r.feature for r in proposals]).astype(np.float64)
    if X.shape[1] != E.shape[1]:
        raise DimensionMismatchError(
            f"Proposal features have dimension {X.shape[1]}, exemplars {E.shape[1]}."
        )
    X = normalize(X)

    dist = np.maximum(0.0, 1.0 - X @ E.T)
    per_class = np.minimum.reduceat(dist, offsets, axis=1)

    ## Classes are in ascending id order, so argmin prefers the lowest id on ties.
    nearest = np.argmin(per_class, axis=1)
    nearest_dist = per_class[np.arange(len(X)), nearest]

    accepted = []
    for i in np.flatnonzero(nearest_dist <= store.current_mining_distance):
        accepted.append((proposals[i], int(class_ids[nearest[i]]), float(nearest_dist[i])))

    for r, class_id, _ in accepted:
        store.add(class_id, [Exemplar(r, _unit(r.feature), source=MINED, step=step)])

    return accepted


def refresh_features(store, provider):
    """Recomputes every exemplar feature through `provider(record) -> vector`.

    All features are computed before any is replaced, so a failing provider
    leaves the store untouched.
    """
    dim = store.dim
    updates = []
    for class_id, exemplars in store.classes.items():
        for e in exemplars:
            try:
                feature = np.asarray(provider(e.record), dtype=np.float64)
            except Exception as exc:
                raise ProviderError(
                    f"Feature provider failed for exemplar {e.record.key} of class {class_id}: {exc}"
                ) from exc

            if feature.shape != (dim,):
                raise ProviderError(
                    f"Feature provider returned shape {feature.shape} for exemplar {e.record.key}, expected ({dim},)."
                )
            if not np.all(np.isfinite(feature)) or not np.any(feature):
                raise ProviderError(
                    f"Feature provider returned a degenerate vector for exemplar {e.record.key}."
                )

            updates.append((e, _unit(feature)))

    for e, feature in updates:
        e.feature = feature
    store.invalidate()

    return store
