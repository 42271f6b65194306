"""One-dimensional k-means clustering (Lloyd's algorithm).

Operates on flat arrays of scalar samples such as an unrolled a* plane.
Every step is deterministic given the seed: k-means++ seeding draws from
``numpy.random.default_rng(seed)``, assignment ties go to the lowest
cluster index, and empty clusters are repaired by converting the sample
farthest from its current centroid into the empty cluster's centroid
(ties again to the lowest sample index).  Sample values are expected to
be small integers (8-bit plane values), which keeps per-cluster sums
exact in float64 regardless of summation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError


@dataclass
class ClusterModel:
    """Result of a k-means run.

    centroids: float64 array of shape (k,), cluster centers.
    assignments: intp array of shape (n,), per-sample cluster index.
    objective: final sum of squared distances to assigned centroids.
    objective_history: objective after each assignment pass, in order.
    """

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    objective_history: np.ndarray

    def __post_init__(self) -> None:
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        self.assignments = np.asarray(self.assignments)
        self.objective_history = np.asarray(self.objective_history, dtype=np.float64)
        if self.centroids.shape != (self.k,):
            raise ShapeMismatchError(f"expected {self.k} centroids, got {self.centroids.shape}")


def _assign(samples: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid assignment; ties resolve to the lowest index."""
    d2 = (samples[:, None] - centroids[None, :]) ** 2
    labels = np.argmin(d2, axis=1)  # argmin returns the first minimum
    return labels, d2[np.arange(samples.size), labels]


def _repair_empty(
    samples: np.ndarray, labels: np.ndarray, dist2: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    """Give each empty cluster the sample farthest from its own centroid.

    Empty clusters are processed in ascending index order.  A sample
    spent on a repair has its distance zeroed so it is not reused for a
    second empty cluster.
    """
    counts = np.bincount(labels, minlength=k)
    for j in range(k):
        if counts[j] > 0:
            continue
        far = int(np.argmax(dist2))
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        dist2[far] = 0.0
    return labels, dist2


def _seed_centroids(samples: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: first center uniform, the rest weighted by D^2."""
    centroids = np.empty(k, dtype=np.float64)
    centroids[0] = samples[rng.integers(samples.size)]
    d2 = (samples - centroids[0]) ** 2
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[j] = samples[rng.integers(samples.size)]
            continue
        idx = rng.choice(samples.size, p=d2 / total)
        centroids[j] = samples[idx]
        d2 = np.minimum(d2, (samples - centroids[j]) ** 2)
    return centroids


def kmeans_1d(
    samples: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-4,
    init_centroids: np.ndarray | None = None,
) -> ClusterModel:
    """Cluster scalar samples into k groups with Lloyd's algorithm.

    Iterates assignment and mean update until no centroid moves by more
    than ``tol`` or ``max_iter`` passes have run, then performs one
    final assignment so the returned assignments are nearest-centroid
    consistent with the returned centroids.  When the input has fewer
    than k distinct values the run degenerates to one cluster per
    distinct value and the model reports that smaller k.

    ``init_centroids`` bypasses seeding, which lets two implementations
    share an identical starting state.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot cluster an empty sample array")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if x.size < k and init_centroids is not None:
        raise ValueError(f"need at least k={k} samples, got {x.size}")

    distinct = np.unique(x)
    if init_centroids is None and distinct.size < k:
        # Degenerate input: one cluster per distinct value.
        centroids = distinct.astype(np.float64)
        labels = np.searchsorted(distinct, x)
        history = np.array([0.0])
        return ClusterModel(
            k=distinct.size,
            centroids=centroids,
            assignments=labels,
            objective=0.0,
            objective_history=history,
        )

    if init_centroids is not None:
        centroids = np.asarray(init_centroids, dtype=np.float64).copy()
        if centroids.shape != (k,):
            raise ShapeMismatchError(f"init_centroids must have shape ({k},), got {centroids.shape}")
    else:
        rng = np.random.default_rng(seed)
        centroids = _seed_centroids(x, k, rng)

    history: list[float] = []
    for _ in range(max_iter):
        labels, dist2 = _assign(x, centroids)
        labels, dist2 = _repair_empty(x, labels, dist2, k)
        history.append(float(dist2.sum()))
        sums = np.bincount(labels, weights=x, minlength=k)
        counts = np.bincount(labels, minlength=k)
        # A cluster left empty by a cascade of repairs keeps its centroid.
        new_centroids = np.where(counts > 0, sums / np.maximum(counts, 1), centroids)
        shift = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if shift <= tol:
            break

    labels, dist2 = _assign(x, centroids)
    labels, dist2 = _repair_empty(x, labels, dist2, k)
    history.append(float(dist2.sum()))
    return ClusterModel(
        k=k,
        centroids=centroids,
        assignments=labels,
        objective=history[-1],
        objective_history=np.array(history),
    )


def reconstruct_clustered(model: ClusterModel, width: int, height: int) -> np.ndarray:
    """Rebuild a (height, width) uint8 plane from cluster assignments.

    Every sample is replaced by its centroid rounded half up and clipped
    to [0, 255].
    """
    if model.assignments.size != width * height:
        raise ShapeMismatchError(
            f"{model.assignments.size} assignments cannot fill a {width}x{height} plane"
        )
    quant = np.clip(np.floor(model.centroids + 0.5), 0, 255).astype(np.uint8)
    return quant[model.assignments].reshape(height, width)
