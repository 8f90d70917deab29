import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Tuple
import numpy as np
from sklearn.preprocessing import normalize
from tqdm.auto import tqdm

from ..errors import DiscoveryError
from ..random import get_rng, round_seed
from .config import EngineConfig
from .exemplars import (
    ExemplarStore,
    cluster_reports,
    mine_exemplars,
    refresh_features,
    select_unknown_clusters,
)
from .kmeans import spherical_kmeans
from .nms import dedup_nms, sample_proposals


DISTRACTOR = -1


def _cluster_round(buffer, store, cfg, provider, step, round_idx):
    if provider is not None:
        refresh_features(store, provider)

    if not buffer:
        store.advance(cfg)
        return []

    features = normalize(np.stack([r.feature for r in buffer]).astype(np.float64))
    result = spherical_kmeans(
        features,
        cfg.k_clusters,
        rng_seed=round_seed(cfg.rng_seed, round_idx),
        max_iter=cfg.kmeans_max_iter,
    )
    reports = cluster_reports(buffer, features, result)

    created = select_unknown_clusters(
        reports, store, cfg, records=buffer, features=features, step=step
    )

    logging.info(
        {
            "step": step,
            "buffer": len(buffer),
            "kmeans_iter": result.n_iter,
            "new_classes": len(created),
            "classes": len(store),
            "exemplars": store.n_exemplars,
            "objectness_threshold": store.current_objectness_threshold,
            "mining_distance": store.current_mining_distance,
        },
        extra=dict(metrics=True, prefix="discover"),
    )

    return created


def run_discovery(stream, cfg=None, provider=None):
    """Alternates buffering/clustering and mining over a stream of proposal batches.

    Each step deduplicates the batch with NMS, draws up to
    `max_proposals_per_batch` void proposals and mines them against the store.
    Proposals not absorbed by mining are buffered, and every
    `cluster_interval_steps` steps the buffer is clustered to found new
    unknown classes and then cleared.

    Returns the final :class:`ExemplarStore` and its pseudo-labels.
    """
    cfg = cfg or EngineConfig()
    rng = get_rng(cfg.rng_seed)

    store = ExemplarStore(cfg)
    buffer = []
    round_idx = 0
    n_mined = 0

    for step, batch in enumerate(tqdm(stream, leave=False, desc="discover")):
        try:
            kept = dedup_nms(batch, iou_thresh=cfg.nms_iou)
            sampled = sample_proposals(
                kept,
                cfg.max_proposals_per_batch,
                cfg.box_area_floor(),
                rng=rng,
                sizes=cfg.proposal_sizes,
            )

            mined = {id(r) for r, _, _ in mine_exemplars(sampled, store, step=step)}
            n_mined += len(mined)
            fresh = [r for r in sampled if id(r) not in mined]
            usable = [r for r in fresh if np.any(r.feature)]
            if len(usable) < len(fresh):
                logging.warning(
                    f"Step {step}: skipped {len(fresh) - len(usable)} proposals with all-zero features."
                )
            buffer.extend(usable)

            if (step + 1) % cfg.cluster_interval_steps == 0:
                _cluster_round(buffer, store, cfg, provider, step, round_idx)
                buffer = []
                round_idx += 1
        except DiscoveryError:
            raise
        except Exception as e:
            raise DiscoveryError(f"step {step}: {type(e).__name__}: {e}") from e

    logging.info(
        f"Discovery found {len(store)} unknown classes with {store.n_exemplars} exemplars ({n_mined} mined)."
    )

    return store, store.pseudo_labels()


@dataclass
class DiscoveryScore:
    n_classes: int = 0
    ## Majority planted label and purity of every discovered class.
    majority: Dict[int, int] = field(default_factory=dict)
    purity: Dict[int, float] = field(default_factory=dict)
    recovered: Tuple[int, ...] = ()
    distractor_acceptance: float = 0.0

    @property
    def n_recovered(self):
        return len(self.recovered)

    @property
    def min_purity(self):
        return min(self.purity.values()) if self.purity else 1.0


def score_discovery(store, assignments, min_purity=0.9):
    """Scores discovered classes against planted ground truth.

    `assignments` maps a record key to its planted label, `-1` for
    distractors. A planted label is recovered when it is the majority label
    of some class whose purity is at least `min_purity`.
    """
    score = DiscoveryScore(n_classes=len(store))

    accepted = set()
    for class_id, exemplars in sorted(store.classes.items()):
        labels = [assignments.get(e.record.key, DISTRACTOR) for e in exemplars]
        accepted.update(e.record.key for e in exemplars)
        if not labels:
            continue
        (label, count), = Counter(labels).most_common(1)
        score.majority[class_id] = label
        score.purity[class_id] = count / len(labels)

    score.recovered = tuple(
        sorted(
            {
                label
                for c, label in score.majority.items()
                if label != DISTRACTOR and score.purity[c] >= min_purity
            }
        )
    )

    distractors = [k for k, v in assignments.items() if v == DISTRACTOR]
    if distractors:
        score.distractor_acceptance = sum(k in accepted for k in distractors) / len(
            distractors
        )

    return score
