import random
import numpy as np
import torch


class FixedSeed:
    """Seeds python, numpy and torch globals for the block; restores on exit.

    Library code never reads global state (see `get_rng`); this guards
    third-party calls made during a seeded command.
    """

    def __init__(self, seed):
        self.seed = seed
        self._saved = None

    def __enter__(self):
        self._saved = (
            random.getstate(),
            np.random.get_state(),
            torch.random.get_rng_state(),
        )
        self.seed_all(seed=self.seed)
        return self

    def __exit__(self, *_):
        py_state, np_state, pt_state = self._saved
        random.setstate(py_state)
        np.random.set_state(np_state)
        torch.random.set_rng_state(pt_state)
        self._saved = None

    @staticmethod
    def seed_all(seed=None):
        if isinstance(seed, int) and seed >= 0:
            random.seed(seed)
            np.random.seed(seed)
            torch.manual_seed(seed)


def get_rng(seed=None):
    """Local generator for every sampling decision; global state stays untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def round_seed(base_seed, round_idx):
    """Seed of clustering round `round_idx` (0-based) in a run seeded with `base_seed`."""
    return int(base_seed) + int(round_idx)
