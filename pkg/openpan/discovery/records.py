from dataclasses import dataclass
import numpy as np

from ..types import BoundingBox


DEFAULT_FEATURE_DIM = 1024


@dataclass(frozen=True, eq=False)
class ProposalRecord:
    """A candidate box with its objectness and RoI feature."""

    image_id: int
    box: BoundingBox
    objectness: float
    feature: np.ndarray
    in_void: bool = True

    def __post_init__(self):
        if not 0.0 <= self.objectness <= 1.0:
            raise ValueError(f"Objectness must be in [0, 1], got {self.objectness}.")
        feature = np.asarray(self.feature)
        if feature.ndim != 1:
            raise ValueError(f"Feature must be a vector, got shape {feature.shape}.")
        object.__setattr__(self, "feature", feature)

    @property
    def key(self):
        """Identity of the box across feature recomputations."""
        return (int(self.image_id), *self.box.as_tuple())

    @property
    def dim(self):
        return self.feature.shape[0]

    def with_feature(self, feature):
        return ProposalRecord(
            self.image_id, self.box, self.objectness, feature, self.in_void
        )
