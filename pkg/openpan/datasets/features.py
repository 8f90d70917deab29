import logging
from itertools import groupby
from pathlib import Path
import numpy as np
import pandas as pd

from ..discovery.records import ProposalRecord
from ..errors import FeatureFileError
from ..types import BoundingBox


MAGIC = b"OPSF"
VERSION = 1

HEADER_DTYPE = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("feature_dim", "<u4"),
        ("record_count", "<u8"),
    ]
)

PSEUDO_LABEL_COLUMNS = ["image_id", "x", "y", "w", "h", "class_id", "source"]
ASSIGNMENT_COLUMNS = ["image_id", "x", "y", "w", "h", "label"]


def record_dtype(feature_dim):
    return np.dtype(
        [
            ("image_id", "<u8"),
            ("box", "<f4", (4,)),
            ("objectness", "<f4"),
            ("in_void", "u1"),
            ("pad", "u1", (3,)),
            ("feature", "<f4", (feature_dim,)),
        ]
    )


def write_feature_file(path, records, feature_dim=None):
    records = list(records)
    if feature_dim is None:
        feature_dim = records[0].dim if records else 0

    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = MAGIC
    header["version"] = VERSION
    header["feature_dim"] = feature_dim
    header["record_count"] = len(records)

    body = np.zeros(len(records), dtype=record_dtype(feature_dim))
    for i, r in enumerate(records):
        if r.dim != feature_dim:
            raise FeatureFileError(
                f"Record {i} has feature dimension {r.dim}, expected {feature_dim}."
            )
        body[i]["image_id"] = r.image_id
        body[i]["box"] = r.box.as_tuple()
        body[i]["objectness"] = r.objectness
        body[i]["in_void"] = int(bool(r.in_void))
        body[i]["feature"] = r.feature

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(body.tobytes())

    logging.debug(f'Wrote {len(records)} proposal records to "{path}".')

    return path


def read_feature_array(path):
    """Raw structured array of a proposal-feature file."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise FeatureFileError(f"Cannot read feature file '{path}': {e}")

    if len(data) < HEADER_DTYPE.itemsize:
        raise FeatureFileError(f"'{path}' is too short for a header.")

    header = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    if header["magic"] != MAGIC:
        raise FeatureFileError(f"'{path}' has bad magic {header['magic']!r}.")
    if header["version"] != VERSION:
        raise FeatureFileError(f"'{path}' has unsupported version {header['version']}.")

    dtype = record_dtype(int(header["feature_dim"]))
    count = int(header["record_count"])
    expected = HEADER_DTYPE.itemsize + count * dtype.itemsize
    if len(data) != expected:
        raise FeatureFileError(
            f"'{path}' holds {len(data)} bytes, header implies {expected}."
        )

    return np.frombuffer(data, dtype=dtype, count=count, offset=HEADER_DTYPE.itemsize)


def read_feature_file(path):
    arr = read_feature_array(path)

    records = []
    for i, row in enumerate(arr):
        try:
            records.append(
                ProposalRecord(
                    image_id=int(row["image_id"]),
                    box=BoundingBox(*(float(v) for v in row["box"])),
                    objectness=float(row["objectness"]),
                    feature=np.array(row["feature"]),
                    in_void=bool(row["in_void"]),
                )
            )
        except ValueError as e:
            raise FeatureFileError(f"'{path}' record {i}: {e}")

    return records


def batch_stream(records, images_per_step=1):
    """Groups consecutive records of `images_per_step` images into one step."""
    batch, n_images = [], 0
    for _, group in groupby(records, key=lambda r: r.image_id):
        batch.extend(group)
        n_images += 1
        if n_images == images_per_step:
            yield batch
            batch, n_images = [], 0
    if batch:
        yield batch


class FeatureFileProvider:
    """Looks up recomputed exemplar features by (image id, box)."""

    def __init__(self, path_or_records):
        if isinstance(path_or_records, (str, Path)):
            path_or_records = read_feature_file(path_or_records)
        self.index = {r.key: r.feature for r in path_or_records}

    def __len__(self):
        return len(self.index)

    def __call__(self, record):
        try:
            return self.index[record.key]
        except KeyError:
            raise KeyError(f"No feature for image {record.image_id} box {record.box.as_tuple()}.")


def pseudo_label_frame(labels):
    return pd.DataFrame(
        [
            (l.image_id, *l.box.as_tuple(), l.class_id, l.source)
            for l in labels
        ],
        columns=PSEUDO_LABEL_COLUMNS,
    )


def write_pseudo_labels(path, labels):
    pseudo_label_frame(labels).to_csv(path, index=False)
    return path


def read_pseudo_labels(path):
    return pd.read_csv(path)


def write_assignments(path, records, labels):
    pd.DataFrame(
        [(r.image_id, *r.box.as_tuple(), int(l)) for r, l in zip(records, labels)],
        columns=ASSIGNMENT_COLUMNS,
    ).to_csv(path, index=False)
    return path


def read_assignments(path):
    """Planted label per record key, as written by :func:`write_assignments`."""
    frame = pd.read_csv(path)
    return {
        (int(row.image_id), float(row.x), float(row.y), float(row.w), float(row.h)): int(
            row.label
        )
        for row in frame.itertuples(index=False)
    }
