"""Correlation-based agglomerative clustering of predictor columns."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .core import gram, standardize
from .exceptions import DegenerateRepresentative, InvalidCount
from .group_lasso import GroupPartition

__all__ = [
    "Dendrogram",
    "ClusterRepresentatives",
    "corr_distance_matrix",
    "hier_cluster",
    "cut",
    "cluster_columns",
    "representatives",
    "write_partition_csv",
    "read_partition_csv",
    "VariableClusterer",
]

DEFAULT_CUT_HEIGHT = 0.5
LINKAGES = ("average", "complete")


@dataclass(frozen=True)
class Dendrogram:
    """Merge history in scipy linkage layout.

    Row ``k`` of ``merges`` is ``(left, right, height, size)``: clusters
    ``left`` and ``right`` (leaves are ``0..p-1``, the cluster formed at step
    ``k`` is ``p + k``) join at ``height`` into a cluster with ``size``
    leaves.  The array can be handed to ``scipy.cluster.hierarchy``
    directly.
    """

    merges: np.ndarray
    n_leaves: int

    def __post_init__(self):
        if self.merges.shape != (max(self.n_leaves - 1, 0), 4):
            raise ValueError("a dendrogram over p leaves needs exactly p-1 merges")

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]


def corr_distance_matrix(X) -> np.ndarray:
    """``1 - |corr|`` between the columns of a standardized design."""
    R = gram(X)
    D = 1.0 - np.abs(R)
    np.clip(D, 0.0, None, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def hier_cluster(D, linkage: str = "average") -> Dendrogram:
    """Agglomerative clustering of a dissimilarity matrix.

    Cluster distances are updated with the Lance-Williams recurrence.  Each
    active cluster lives in the slot of its smallest leaf, so when several
    pairs tie at the minimal height the first minimum in row-major order is
    the pair with the lexicographically smallest (min leaf, max leaf) key.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    D = np.array(D, dtype=float)
    p = D.shape[0]
    if D.shape != (p, p):
        raise ValueError("dissimilarity matrix must be square")
    merges = np.zeros((max(p - 1, 0), 4))
    if p <= 1:
        return Dendrogram(merges, p)
    np.fill_diagonal(D, np.inf)
    size = np.ones(p)
    node = np.arange(p)
    for k in range(p - 1):
        flat = int(np.argmin(D))
        a, b = divmod(flat, p)
        if a > b:
            a, b = b, a
        h = D[a, b]
        na, nb = size[a], size[b]
        merges[k] = (min(node[a], node[b]), max(node[a], node[b]), h, na + nb)
        if linkage == "average":
            new = (na * D[a] + nb * D[b]) / (na + nb)
        else:
            new = np.maximum(D[a], D[b])
        D[a, :] = new
        D[:, a] = new
        D[a, a] = np.inf
        D[b, :] = np.inf
        D[:, b] = np.inf
        size[a] = na + nb
        node[a] = p + k
    return Dendrogram(merges, p)


def _union_find_partition(dendrogram, n_merges):
    p = dendrogram.n_leaves
    parent = np.arange(2 * p - 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in range(n_merges):
        left, right = int(dendrogram.merges[k, 0]), int(dendrogram.merges[k, 1])
        parent[find(left)] = p + k
        parent[find(right)] = p + k
    return GroupPartition.from_labels([find(j) for j in range(p)])


def cut(dendrogram: Dendrogram, *, height: float | None = None, count: int | None = None) -> GroupPartition:
    """Cut a dendrogram either below ``height`` or into ``count`` clusters.

    ``height=h`` joins leaves whose connecting merges all lie strictly
    below ``h``.
    """
    if (height is None) == (count is None):
        raise ValueError("give exactly one of height= or count=")
    p = dendrogram.n_leaves
    if count is not None:
        if not 1 <= count <= p:
            raise InvalidCount(f"cluster count must lie in [1, {p}], got {count}")
        return _union_find_partition(dendrogram, p - count)
    # heights are non-decreasing for average and complete linkage; the running
    # max only irons out last-bit roundoff
    heights = np.maximum.accumulate(dendrogram.heights)
    n_merges = int(np.searchsorted(heights, height, side="left"))
    return _union_find_partition(dendrogram, n_merges)


def cluster_columns(X, *, linkage: str = "average", height: float | None = DEFAULT_CUT_HEIGHT, count: int | None = None):
    """Cluster the columns of a standardized design; returns ``(partition, dendrogram)``."""
    dendro = hier_cluster(corr_distance_matrix(X), linkage)
    if count is not None:
        return cut(dendro, count=count), dendro
    return cut(dendro, height=height), dendro


@dataclass
class ClusterRepresentatives:
    """Per-cluster mean columns and the re-standardization applied to them."""

    values: np.ndarray
    partition: GroupPartition
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X) -> np.ndarray:
        """Representatives for new standardized data using the training scaling."""
        return (_group_means(np.asarray(X, dtype=float), self.partition) - self.mean) / self.scale

    def coef_to_columns(self, coef) -> np.ndarray:
        """Spread representative coefficients back onto the member columns."""
        beta = np.zeros(self.partition.p)
        for r, g in enumerate(self.partition.groups):
            beta[list(g)] = coef[r] / (len(g) * self.scale[r])
        return beta


def _group_means(X, partition):
    out = np.empty((X.shape[0], partition.q))
    for r, g in enumerate(partition.groups):
        out[:, r] = X[:, list(g)].mean(axis=1)
    return out


def representatives(X, partition: GroupPartition, *, restandardize: bool = True) -> ClusterRepresentatives:
    """Mean column of each cluster, re-standardized for use in a Lasso.

    Raises
    ------
    DegenerateRepresentative
        When a cluster mean is numerically zero (members cancel).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    M = _group_means(X, partition)
    if not restandardize:
        return ClusterRepresentatives(M, partition, np.zeros(partition.q), np.ones(partition.q))
    mean = M.mean(axis=0)
    centered = M - mean
    nrm = np.linalg.norm(centered, axis=0)
    bad = np.flatnonzero(nrm < 1e-8 * np.sqrt(n))
    if bad.size:
        raise DegenerateRepresentative(int(bad[0]))
    scale = nrm / np.sqrt(n)
    return ClusterRepresentatives(centered / scale, partition, mean, scale)


def write_partition_csv(path, partition: GroupPartition, column_ids=None):
    ids = list(column_ids) if column_ids is not None else list(range(partition.p))
    labels = partition.labels()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["column_id", "cluster_id"])
        for j, lab in enumerate(labels):
            w.writerow([ids[j], int(lab)])


def read_partition_csv(path, column_ids=None) -> GroupPartition:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    pos = {str(c): j for j, c in enumerate(column_ids)} if column_ids is not None else None
    labels = np.empty(len(rows), dtype=int)
    for row in rows:
        j = pos[row["column_id"]] if pos is not None else int(row["column_id"])
        labels[j] = int(row["cluster_id"])
    return GroupPartition.from_labels(labels)


class VariableClusterer(BaseEstimator, TransformerMixin):
    """Cluster columns by correlation and map data to cluster representatives.

    Parameters
    ----------
    linkage : {"average", "complete"}
    cut_height : float
        Dendrogram cut on the ``1 - |corr|`` scale; ignored when
        ``n_clusters`` is set.
    n_clusters : int, optional
    """

    def __init__(self, linkage="average", cut_height=DEFAULT_CUT_HEIGHT, n_clusters=None):
        self.linkage = linkage
        self.cut_height = cut_height
        self.n_clusters = n_clusters

    def fit(self, X, y=None):
        X = validate_data(self, X)
        Xs, _, scaling = standardize(X)
        self.partition_, self.dendrogram_ = cluster_columns(
            Xs, linkage=self.linkage, height=self.cut_height, count=self.n_clusters
        )
        self.labels_ = self.partition_.labels()
        self.scaling_ = scaling
        self.representatives_ = representatives(Xs, self.partition_)
        return self

    def transform(self, X):
        check_is_fitted(self, "partition_")
        X = validate_data(self, X, reset=False)
        return self.representatives_.transform(self.scaling_.transform(X))
