import logging
from dataclasses import dataclass, field
from typing import List
import numpy as np
from sklearn.cluster import kmeans_plusplus
from sklearn.preprocessing import normalize


OBJECTIVE_TOL = 1e-9


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    objective_history: List[float] = field(default_factory=list)
    n_iter: int = 0
    ## Set when k exceeded the number of distinct points.
    degenerate: bool = False

    @property
    def objective(self):
        return self.objective_history[-1] if self.objective_history else 0.0


def _assign(X, centroids):
    sims = X @ centroids.T
    ## argmax returns the first maximum, i.e. ties go to the lowest index.
    assignments = np.argmax(sims, axis=1)
    best = sims[np.arange(len(X)), assignments]
    return assignments, best


def _objective(best):
    return float(np.sum(np.maximum(0.0, 1.0 - best)))


def _update(X, assignments, centroids):
    k, D = centroids.shape
    sums = np.zeros((k, D), dtype=X.dtype)
    np.add.at(sums, assignments, X)
    norms = np.linalg.norm(sums, axis=1)

    new_centroids = centroids.copy()
    ok = norms > 0
    new_centroids[ok] = sums[ok] / norms[ok, None]
    return new_centroids


def _reseed_empty(X, assignments, centroids):
    k = len(centroids)
    counts = np.bincount(assignments, minlength=k)
    for j in np.flatnonzero(counts == 0):
        dist = 1.0 - np.sum(X * centroids[assignments], axis=1)
        donors = counts[assignments] > 1
        if not donors.any():
            break
        dist = np.where(donors, dist, -np.inf)
        i = int(np.argmax(dist))

        counts[assignments[i]] -= 1
        counts[j] += 1
        assignments[i] = j
        centroids[j] = X[i]

    return assignments, centroids


def spherical_kmeans(points, k, rng_seed=0, max_iter=100):
    """k-means under cosine distance `1 - <x, c>` on the unit sphere.

    Seeds with k-means++, then alternates centroid updates (normalized member
    sums) and nearest-centroid assignment until assignments stop changing.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError(f"Expected a non-empty (n, D) array, got shape {X.shape}.")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}.")

    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise ValueError(f"Zero-norm input vector at index {int(np.argmin(norms))}.")
    X = normalize(X)

    n_distinct = len(np.unique(X, axis=0))
    degenerate = k > n_distinct
    if degenerate:
        logging.warning(
            f"Requested {k} clusters for {n_distinct} distinct points, using {n_distinct}."
        )
        k = n_distinct

    centroids, _ = kmeans_plusplus(X, n_clusters=k, random_state=rng_seed)
    centroids = normalize(centroids)

    assignments, best = _assign(X, centroids)
    history = [_objective(best)]

    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        centroids = _update(X, assignments, centroids)
        assignments, centroids = _reseed_empty(X, assignments.copy(), centroids)

        new_assignments, best = _assign(X, centroids)
        objective = _objective(best)
        assert (
            objective <= history[-1] + OBJECTIVE_TOL
        ), f"Objective increased from {history[-1]} to {objective} at iteration {n_iter}."
        history.append(objective)

        converged = np.array_equal(new_assignments, assignments)
        assignments = new_assignments
        if converged:
            break

    return KMeansResult(
        assignments=assignments,
        centroids=centroids,
        objective_history=history,
        n_iter=n_iter,
        degenerate=degenerate,
    )
