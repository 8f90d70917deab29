from .config import EngineConfig, SIZE_BUCKETS, size_bucket
from .records import DEFAULT_FEATURE_DIM, ProposalRecord
from .nms import dedup_nms, sample_proposals
from .kmeans import KMeansResult, spherical_kmeans
from .exemplars import (
    CLUSTER,
    MINED,
    ClusterReport,
    Exemplar,
    ExemplarStore,
    PseudoLabel,
    cluster_reports,
    mine_exemplars,
    refresh_features,
    select_unknown_clusters,
)
from .engine import DISTRACTOR, DiscoveryScore, run_discovery, score_discovery


__all__ = [
    "EngineConfig",
    "SIZE_BUCKETS",
    "size_bucket",
    "DEFAULT_FEATURE_DIM",
    "ProposalRecord",
    "dedup_nms",
    "sample_proposals",
    "KMeansResult",
    "spherical_kmeans",
    "CLUSTER",
    "MINED",
    "ClusterReport",
    "Exemplar",
    "ExemplarStore",
    "PseudoLabel",
    "cluster_reports",
    "mine_exemplars",
    "refresh_features",
    "select_unknown_clusters",
    "DISTRACTOR",
    "DiscoveryScore",
    "run_discovery",
    "score_discovery",
]
