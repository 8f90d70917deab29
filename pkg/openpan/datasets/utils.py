import os
from torch.utils.data import DataLoader


def get_num_workers(num_workers=None):
    if num_workers is None:
        num_workers = int(os.environ.get("OPENPAN_NUM_WORKERS", 0))
    if num_workers < 0:
        raise ValueError(f"num_workers must be non-negative, got {num_workers}.")
    return min(num_workers, os.cpu_count() or 1)


def get_loader(dataset, batch_size=1, num_workers=None, **kwargs):
    num_workers = get_num_workers(num_workers=num_workers)
    loader = DataLoader(
        dataset, batch_size=batch_size, num_workers=num_workers, **kwargs
    )
    return loader
