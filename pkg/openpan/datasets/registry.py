import json
import logging
from pathlib import Path

from ..errors import SplitError
from ..types import SplitSpec


__split_map = dict()


def register_split(spec, overwrite=False):
    if not overwrite and spec.name in __split_map:
        raise SplitError(f'Duplicate registration for split "{spec.name}".')

    __split_map[spec.name] = spec
    return spec


def get_split(name):
    name = str(name)
    if name not in __split_map:
        raise SplitError(f'Split "{name}" not found.')

    return __split_map[name]


def list_splits():
    return sorted(__split_map.keys(), key=lambda s: (len(s), s))


def split_from_dict(data):
    try:
        base = data.get("cumulative_base")
        return SplitSpec(
            name=str(data["name"]),
            unknown_class_names=tuple(data.get("unknown_class_names", [])),
            cumulative_base=None if base is None else str(base),
        )
    except (KeyError, TypeError, AttributeError) as e:
        raise SplitError(f"Malformed split definition: {e}")


def load_split_file(path, register=True):
    """Reads a split definition (JSON with `name`, `unknown_class_names` and an
    optional `cumulative_base`) and registers it."""
    path = Path(path)
    try:
        with open(path) as f:
            spec = split_from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise SplitError(f"Invalid split file '{path}': {e}")

    if register:
        register_split(spec, overwrite=True)
        logging.debug(f'Registered split "{spec.name}" from "{path}".')

    return spec


def expand_split(spec):
    """Unknown class names of `spec`, base splits first, in listed order."""
    if not isinstance(spec, SplitSpec):
        spec = get_split(spec)

    chain, seen = [], set()
    while spec is not None:
        if spec.name in seen:
            raise SplitError(f'Cyclic cumulative_base at split "{spec.name}".')
        seen.add(spec.name)
        chain.append(spec)
        spec = None if spec.cumulative_base is None else get_split(spec.cumulative_base)

    names = [n for s in reversed(chain) for n in s.unknown_class_names]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise SplitError(f"Duplicate classes after cumulative expansion: {duplicates}.")

    return names
