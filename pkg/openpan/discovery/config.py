from dataclasses import dataclass, field
from typing import Optional, Tuple

from ..errors import ConfigError


SMALL_MAX_AREA = 32**2
LARGE_MIN_AREA = 96**2

SIZE_BUCKETS = ("small", "medium", "large")


def size_bucket(area):
    if area < SMALL_MAX_AREA:
        return "small"
    if area < LARGE_MIN_AREA:
        return "medium"
    return "large"


@dataclass
class EngineConfig:
    k_clusters: int = field(default=128)
    cluster_interval_steps: int = field(default=200)
    top_cluster_fraction: float = field(default=0.10)
    objectness_start: float = field(default=0.9)
    objectness_end: float = field(default=0.99)
    objectness_slope: float = field(default=0.009)
    membership_cos_dist: float = field(default=0.15)
    mining_cos_dist_start: float = field(default=0.025)
    mining_cos_dist_end: float = field(default=0.01)
    mining_slope: float = field(default=0.0015)
    max_proposals_per_batch: int = field(default=20)
    min_box_area: Optional[float] = field(default=None)
    proposal_sizes: Tuple[str, ...] = field(default=("medium", "large"))
    nms_iou: float = field(default=1e-7)
    kmeans_max_iter: int = field(default=100)
    rng_seed: int = field(default=0)

    def __post_init__(self):
        self.proposal_sizes = tuple(self.proposal_sizes)

        if self.k_clusters < 1:
            raise ConfigError(f"k_clusters must be >= 1, got {self.k_clusters}.")
        if self.cluster_interval_steps < 1:
            raise ConfigError(
                f"cluster_interval_steps must be >= 1, got {self.cluster_interval_steps}."
            )
        if not 0 < self.top_cluster_fraction <= 1:
            raise ConfigError(
                f"top_cluster_fraction must be in (0, 1], got {self.top_cluster_fraction}."
            )
        for name in ["objectness_start", "objectness_end", "nms_iou"]:
            if not 0 <= getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in [0, 1], got {getattr(self, name)}.")
        for name in ["membership_cos_dist", "mining_cos_dist_start", "mining_cos_dist_end"]:
            if not 0 <= getattr(self, name) <= 2:
                raise ConfigError(f"{name} must be in [0, 2], got {getattr(self, name)}.")
        if self.objectness_end < self.objectness_start:
            raise ConfigError("objectness_end must not be below objectness_start.")
        if self.mining_cos_dist_end > self.mining_cos_dist_start:
            raise ConfigError("mining_cos_dist_end must not exceed mining_cos_dist_start.")
        if self.objectness_slope < 0 or self.mining_slope < 0:
            raise ConfigError("Ramp slopes must be non-negative.")
        if self.max_proposals_per_batch < 0:
            raise ConfigError("max_proposals_per_batch must be non-negative.")
        unknown = set(self.proposal_sizes) - set(SIZE_BUCKETS)
        if unknown:
            raise ConfigError(
                f"Unknown proposal sizes {sorted(unknown)}, expected a subset of {SIZE_BUCKETS}."
            )
        if self.min_box_area is not None:
            if self.min_box_area < 0:
                raise ConfigError(f"min_box_area must be non-negative, got {self.min_box_area}.")
            if "small" in self.proposal_sizes and self.min_box_area >= SMALL_MAX_AREA:
                raise ConfigError(
                    f"min_box_area {self.min_box_area} excludes every small proposal, "
                    f"but proposal_sizes includes \"small\"."
                )

    def box_area_floor(self):
        """Smallest samplable box area: `min_box_area`, or derived from `proposal_sizes` when unset."""
        if self.min_box_area is not None:
            return self.min_box_area
        return 0 if "small" in self.proposal_sizes else SMALL_MAX_AREA

    def objectness_threshold(self, found_class_count):
        return min(
            self.objectness_end,
            self.objectness_start + self.objectness_slope * found_class_count,
        )

    def mining_distance(self, found_class_count):
        return max(
            self.mining_cos_dist_end,
            self.mining_cos_dist_start - self.mining_slope * found_class_count,
        )
