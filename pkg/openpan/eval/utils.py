import logging
from dataclasses import dataclass, field
from typing import Optional
from torch.utils.data import Dataset
from tqdm.auto import tqdm

from ..datasets.utils import get_loader
from ..errors import OpenPanError, PairEvaluationError
from ..logging import Timer
from .pq import aggregate, match_segments


@dataclass
class EvalConfig:
    num_workers: Optional[int] = field(default=None)
    per_category: bool = field(default=True)


class MapPairDataset(Dataset):
    """Matches one (gt, pred) pair per item, so DataLoader workers split images."""

    def __init__(self, pairs, cats):
        self.pairs = pairs
        self.cats = cats

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, idx):
        image_id, gt, pred = self.pairs[idx]
        try:
            return match_segments(gt, pred, self.cats, image_id=image_id)
        except OpenPanError as e:
            raise PairEvaluationError(f"image {image_id}: {type(e).__name__}: {e}") from e


def _first(batch):
    return batch[0]


def _as_triples(pairs):
    triples = []
    for idx, p in enumerate(pairs):
        if len(p) == 3:
            triples.append(tuple(p))
        else:
            triples.append((idx, *p))
    return triples


def evaluate_dataset(pairs, cats, num_workers=None):
    """Aggregated report over `(image_id, gt, pred)` triples.

    Plain `(gt, pred)` pairs get their stream position as image id. The result
    does not depend on the worker count or on the input order.
    """
    pairs = _as_triples(pairs)
    if not pairs:
        return aggregate([], cats)

    loader = get_loader(
        MapPairDataset(pairs, cats),
        batch_size=1,
        num_workers=num_workers,
        collate_fn=_first,
    )

    with Timer() as timer:
        results = [r for r in tqdm(loader, leave=False, desc="evaluate")]
    report = aggregate(results, cats)

    logging.debug(
        {"images": len(results), "ts": timer.elapsed, "workers": loader.num_workers}
    )

    return report
