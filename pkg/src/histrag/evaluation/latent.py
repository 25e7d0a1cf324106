"""Seeded k-means and cluster validity indices (silhouette, Davies-Bouldin,
Calinski-Harabasz), all with Euclidean distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ClusteringError, UndefinedMetricError


def _as_matrix(embeddings) -> np.ndarray:
    rows = [getattr(e, "vector", e) for e in embeddings] if not isinstance(embeddings, np.ndarray) else embeddings
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("embeddings must form a 2-D array")
    return X


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = _sq_dists(X, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ClusteringError("fewer distinct points than clusters")
        idx = int(rng.choice(n, p=d2 / total))
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def assign_clusters(embeddings, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's k-means with k-means++ seeding; returns integer labels in [0, k)."""
    X = _as_matrix(embeddings)
    n = X.shape[0]
    if k < 2 or n <= k:
        raise ClusteringError(f"need k >= 2 and n > k (got k={k}, n={n})")
    if np.all(X == X[0]):
        raise ClusteringError("all points are identical: only one effective cluster")
    if len(np.unique(X, axis=0)) < k:
        raise ClusteringError("fewer distinct points than clusters")
    rng = np.random.default_rng(seed)
    C = _kmeanspp(X, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        labels = np.argmin(_sq_dists(X, C), axis=1)
        new = C.copy()
        for j in range(k):
            members = X[labels == j]
            if len(members):
                new[j] = members.mean(axis=0)
            else:
                # reseed an empty cluster at the point worst served by its centroid
                far = int(np.argmax(((X - C[labels]) ** 2).sum(axis=1)))
                new[j] = X[far]
                labels[far] = j
        shift = float(np.sqrt(((new - C) ** 2).sum(axis=1)).max())
        C = new
        if shift <= tol:
            break
    labels = np.argmin(_sq_dists(X, C), axis=1)
    if len(np.unique(labels)) < k:
        raise ClusteringError("k-means ended with an empty cluster")
    return labels


@dataclass(frozen=True)
class ClusterMetrics:
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float

    def as_dict(self) -> dict[str, float]:
        return {"silhouette": self.silhouette, "davies_bouldin": self.davies_bouldin, "calinski_harabasz": self.calinski_harabasz}


def _pairwise(X: np.ndarray, block: int = 256) -> np.ndarray:
    n = X.shape[0]
    D = np.empty((n, n))
    for lo in range(0, n, block):
        D[lo:lo + block] = np.sqrt(((X[lo:lo + block, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    return D


def cluster_metrics(embeddings, labels, k: int | None = None) -> ClusterMetrics:
    """Silhouette, Davies-Bouldin and Calinski-Harabasz for a labelling.

    Singleton clusters contribute a silhouette of 0. Calinski-Harabasz is
    ``inf`` when every point sits on its centroid.
    """
    X = _as_matrix(embeddings)
    labels = np.asarray(labels)
    n = X.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels must have one entry per embedding")
    uniq = np.unique(labels)
    if k is not None:
        missing = set(range(k)) - set(uniq.tolist())
        if missing:
            raise UndefinedMetricError(f"empty cluster(s): {sorted(missing)}")
    n_clusters = len(uniq)
    if n_clusters < 2 or n < 3:
        raise UndefinedMetricError("need at least 2 clusters and 3 points")
    idx = np.searchsorted(uniq, labels)
    onehot = np.zeros((n, n_clusters))
    onehot[np.arange(n), idx] = 1.0
    sizes = onehot.sum(axis=0)

    # silhouette
    D = _pairwise(X)
    sums = D @ onehot  # (n, clusters): total distance from i to each cluster
    own = sizes[idx]
    a = np.where(own > 1, sums[np.arange(n), idx] / np.maximum(own - 1, 1), 0.0)
    mean_other = sums / sizes
    mean_other[np.arange(n), idx] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    silhouette = float(s.mean())

    # Davies-Bouldin
    centroids = (onehot.T @ X) / sizes[:, None]
    sigma = (np.sqrt(((X - centroids[idx]) ** 2).sum(axis=1)) @ onehot) / sizes
    cdist = _pairwise(centroids)
    if np.any(cdist[~np.eye(n_clusters, dtype=bool)] == 0):
        raise UndefinedMetricError("two clusters share a centroid")
    ratio = (sigma[:, None] + sigma[None, :]) / np.where(cdist > 0, cdist, 1.0)
    np.fill_diagonal(ratio, -np.inf)
    davies_bouldin = float(ratio.max(axis=1).mean())

    # Calinski-Harabasz
    overall = X.mean(axis=0)
    ss_between = float((sizes * ((centroids - overall) ** 2).sum(axis=1)).sum())
    ss_within = float(((X - centroids[idx]) ** 2).sum())
    if n == n_clusters:
        raise UndefinedMetricError("Calinski-Harabasz needs n > number of clusters")
    if ss_within == 0.0:
        ch = float("inf")
    else:
        ch = (ss_between / (n_clusters - 1)) / (ss_within / (n - n_clusters))
    return ClusterMetrics(silhouette, davies_bouldin, ch)
