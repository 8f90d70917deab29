import logging
from dataclasses import replace
from itertools import product
from tqdm.auto import tqdm
import wandb
import pandas as pd

from openpan.datasets import SynthConfig, batch_stream, generate_synthetic_features
from openpan.discovery import EngineConfig, run_discovery, score_discovery
from openpan.logging import entrypoint
from openpan.random import FixedSeed, get_rng
from openpan.types import BoundingBox


SIZE_CHOICES = {
    "large": ("large",),
    "medium": ("medium",),
    "small": ("small",),
    "large+medium": ("medium", "large"),
    "all": ("small", "medium", "large"),
}


def resize_boxes(records, assignments, box_sizes, seed):
    """Gives every record a square box drawn from `box_sizes`, keeping its grid corner."""
    rng = get_rng(seed)
    sizes = rng.choice(box_sizes, size=len(records))

    resized, relabeled = [], dict()
    for r, s in zip(records, sizes):
        new = replace(r, box=BoundingBox(r.box.x, r.box.y, float(s), float(s)))
        resized.append(new)
        relabeled[new.key] = assignments[r.key]
    return resized, relabeled


@entrypoint
def main(
    seed=137,
    log_dir=None,
    k_clusters=(64, 128, 256),
    cluster_interval_steps=(100, 200, 400),
    proposal_sizes=tuple(SIZE_CHOICES),
    n_planted_classes=8,
    points_per_class=500,
    distractor_fraction=0.4,
    feature_dim=1024,
    box_sizes=(24, 48, 112),
):
    """Sweeps discovery knobs on a planted-cluster stream.

    Every proposal gets a square box drawn uniformly from `box_sizes`; the
    defaults put one third of the stream in each size bucket.
    """
    config = dict(
        seed=seed,
        log_dir=log_dir,
        k_clusters=k_clusters,
        cluster_interval_steps=cluster_interval_steps,
        proposal_sizes=proposal_sizes,
        n_planted_classes=n_planted_classes,
        points_per_class=points_per_class,
        distractor_fraction=distractor_fraction,
        feature_dim=feature_dim,
        box_sizes=box_sizes,
    )
    if wandb.run is not None:
        wandb.config.update(config)

    records, assignments = generate_synthetic_features(
        SynthConfig(
            n_planted_classes=n_planted_classes,
            points_per_class=points_per_class,
            distractor_fraction=distractor_fraction,
            feature_dim=feature_dim,
            box_size=max(box_sizes),
            grid_stride=max(box_sizes),
            rng_seed=seed,
        )
    )
    records, assignments = resize_boxes(records, assignments, box_sizes, seed)

    all_metrics = []
    grid = list(product(k_clusters, cluster_interval_steps, proposal_sizes))
    for k, interval, sizes in tqdm(grid, leave=False):
        cfg = EngineConfig(
            k_clusters=k,
            cluster_interval_steps=interval,
            proposal_sizes=SIZE_CHOICES[sizes],
            rng_seed=seed,
        )
        with FixedSeed(seed):
            store, _ = run_discovery(batch_stream(records), cfg=cfg)
        score = score_discovery(store, assignments)

        all_metrics.append(
            {
                "k_clusters": k,
                "cluster_interval_steps": interval,
                "proposal_sizes": sizes,
                "classes": score.n_classes,
                "recovered": score.n_recovered,
                "min_purity": score.min_purity,
                "distractor_acceptance": score.distractor_acceptance,
                "exemplars": store.n_exemplars,
            }
        )
        logging.info(all_metrics[-1])

    frame = pd.DataFrame(all_metrics)
    frame.to_csv(f"{log_dir}/sensitivity.csv", index=False)

    logging.info(
        {"sensitivity": wandb.Table(dataframe=frame)},
        extra=dict(metrics=True),
    )


if __name__ == "__main__":
    import fire

    fire.Fire(main)
