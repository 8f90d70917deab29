from dataclasses import dataclass, field
from typing import Tuple
import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax as _softmax

from .errors import LossInputError


BACKGROUND = "bg"

## NOTE: Upper bound on p_c inside -log(1 - p_c).
P_MAX = 1.0 - 1e-12


@dataclass(frozen=True)
class LabelSpace:
    """Ordered classifier outputs: known things, background, unknowns."""

    known_ids: Tuple[int, ...] = ()
    unknown_labels: Tuple = ()

    @property
    def labels(self):
        return (*self.known_ids, BACKGROUND, *self.unknown_labels)

    @property
    def bg_index(self):
        return len(self.known_ids)

    @property
    def known_thing_indices(self):
        return tuple(range(len(self.known_ids)))

    @property
    def unknown_indices(self):
        start = self.bg_index + 1
        return tuple(range(start, start + len(self.unknown_labels)))

    def __len__(self):
        return len(self.known_ids) + 1 + len(self.unknown_labels)

    def index(self, label):
        return self.labels.index(label)


def build_label_space(cats, n_unknown=None):
    """Known things of `cats`, then background, then the unknown classes.

    Unknown slots are the table's unknown ids, or `n_unknown` numbered slots
    (e.g. one per discovered class) when given.
    """
    known = tuple(c.id for c in cats.known_things())
    if n_unknown is None:
        unknown = tuple(c.id for c in cats.unknowns())
    else:
        unknown = tuple(f"unknown_{i}" for i in range(n_unknown))
    return LabelSpace(known_ids=known, unknown_labels=unknown)


@dataclass
class ClassScores:
    logits: np.ndarray
    label_space: LabelSpace = field(default=None)

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        if self.logits.ndim != 1:
            raise LossInputError(f"Logits must be a vector, got shape {self.logits.shape}.")
        if self.label_space is None:
            ## Bare logits: every entry but the last two is a known thing.
            n = len(self.logits)
            self.label_space = LabelSpace(
                known_ids=tuple(range(max(n - 2, 0))),
                unknown_labels=("unknown",) if n >= 2 else (),
            )
        if len(self.label_space) != len(self.logits):
            raise LossInputError(
                f"{len(self.logits)} logits for a label space of {len(self.label_space)}."
            )


@dataclass(frozen=True)
class LossOutput:
    value: float
    gradient: np.ndarray


def _as_scores(scores):
    return scores if isinstance(scores, ClassScores) else ClassScores(scores)


def _check_finite(logits):
    if np.isnan(logits).any():
        raise LossInputError("Logits contain NaN.")
    if not np.isfinite(logits).all():
        raise LossInputError("Logits contain infinite values.")


def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    _check_finite(logits)
    return _softmax(logits)


def ce_loss(scores, target):
    scores = _as_scores(scores)
    n = len(scores.logits)
    if not isinstance(target, (int, np.integer)) or not 0 <= target < n:
        raise LossInputError(f"Target {target!r} outside label space of size {n}.")

    _check_finite(scores.logits)
    log_p = log_softmax(scores.logits)

    gradient = np.exp(log_p)
    gradient[target] -= 1.0

    return LossOutput(value=float(-log_p[target]), gradient=gradient)


def _known_indices(scores, known_thing_indices):
    space = scores.label_space
    if known_thing_indices is None:
        return np.array(space.known_thing_indices, dtype=np.int64)

    idx = np.asarray(known_thing_indices, dtype=np.int64).reshape(-1)
    if len(set(idx.tolist())) != len(idx):
        raise LossInputError("Duplicate known-thing indices.")
    invalid = set(idx.tolist()) - set(space.known_thing_indices)
    if invalid:
        raise LossInputError(
            f"Indices {sorted(invalid)} are not known things (background is {space.bg_index})."
        )
    return idx


def void_suppression_loss(scores, known_thing_indices=None):
    """Pushes down known-thing probabilities of a box lying in a void region.

    `sum_{c in known things} -log(1 - p_c)`, with `p_c` capped at
    :data:`P_MAX`.
    """
    scores = _as_scores(scores)
    idx = _known_indices(scores, known_thing_indices)

    p = softmax(scores.logits)
    pc = np.minimum(p[idx], P_MAX)

    value = float(-np.sum(np.log1p(-pc)))

    ratio = pc / (1.0 - pc)
    gradient = -p * np.sum(ratio)
    gradient[idx] += ratio

    return LossOutput(value=value, gradient=gradient)


def total_cls_loss(scores, target, is_void, known_thing_indices=None, void_weight=1.0):
    scores = _as_scores(scores)
    ce = ce_loss(scores, target)
    if not is_void:
        return ce

    void = void_suppression_loss(scores, known_thing_indices=known_thing_indices)
    return LossOutput(
        value=ce.value + void_weight * void.value,
        gradient=ce.gradient + void_weight * void.gradient,
    )


def mean_cls_loss(batch, known_thing_indices=None, void_weight=1.0):
    """Mean of :func:`total_cls_loss` over `(scores, target, is_void)` boxes.

    The gradient row of each box is its own gradient divided by the batch size.
    """
    outputs = [
        total_cls_loss(
            s,
            t,
            v,
            known_thing_indices=known_thing_indices,
            void_weight=void_weight,
        )
        for s, t, v in batch
    ]
    if not outputs:
        raise LossInputError("Empty batch.")

    n = len(outputs)
    return LossOutput(
        value=float(np.mean([o.value for o in outputs])),
        gradient=np.stack([o.gradient for o in outputs]) / n,
    )
