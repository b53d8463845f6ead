"""Clustering primitives for knowledge-graph aggregation.

Ward agglomerative clustering with silhouette-driven cluster-count
selection (elbow reported, used only to break ties), and affinity
propagation implemented directly so the tie-break and non-convergence
behaviour is fully specified: similarity is negative squared Euclidean
distance, preference the median similarity, damping 0.5, and the
exemplar set must stay stable for 20 iterations to count as converged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist
from sklearn.metrics import silhouette_score


@dataclass
class WardReport:
    k: int
    labels: np.ndarray
    per_k: dict[int, dict[str, float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def _sse(X: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for lab in np.unique(labels):
        pts = X[labels == lab]
        total += float(((pts - pts.mean(axis=0)) ** 2).sum())
    return total


def ward_cluster(X: np.ndarray, k_range: list[int] | None = None,
                 k_override: int | None = None) -> WardReport:
    """Ward-linkage clustering with k chosen by mean silhouette.

    Default k_range is 2..ceil(sqrt(N)). Exact silhouette ties prefer the
    stronger elbow (second difference of within-cluster SSE), then the
    smaller k. Degenerate inputs (all points identical) collapse to one
    cluster with a warning.
    """
    n = len(X)
    if n == 0:
        raise ValueError("no points to cluster")
    if n == 1:
        return WardReport(1, np.zeros(1, dtype=int), {}, ["single point: k=1"])
    spread = float(np.ptp(X, axis=0).max()) if X.size else 0.0
    if spread < 1e-12:
        return WardReport(1, np.zeros(n, dtype=int),
                          {}, ["all embeddings identical: silhouette undefined, k=1"])
    if n == 2:
        return WardReport(2, np.array([0, 1]),
                          {}, ["two points: k=2, silhouette undefined"])

    Z = linkage(X, method="ward")
    if k_override is not None:
        labels = fcluster(Z, k_override, criterion="maxclust") - 1
        return WardReport(int(len(np.unique(labels))), labels, {}, [])

    if k_range is None:
        k_range = list(range(2, int(np.ceil(np.sqrt(n))) + 1)) or [2]
    k_range = sorted({k for k in k_range if 2 <= k <= n - 1}) or [min(2, n - 1)]

    per_k: dict[int, dict[str, float]] = {}
    labelings: dict[int, np.ndarray] = {}
    sse_by_k: dict[int, float] = {}
    for k in k_range:
        labels = fcluster(Z, k, criterion="maxclust") - 1
        labelings[k] = labels
        sse_by_k[k] = _sse(X, labels)
        if len(np.unique(labels)) < 2:
            continue
        per_k[k] = {"silhouette": float(silhouette_score(X, labels)),
                    "sse": sse_by_k[k]}
    if not per_k:
        return WardReport(1, np.zeros(n, dtype=int), {},
                          ["no k produced a valid partition, k=1"])
    for k in per_k:
        lo, hi = sse_by_k.get(k - 1), sse_by_k.get(k + 1)
        per_k[k]["elbow"] = (lo - 2 * sse_by_k[k] + hi) if lo is not None and hi is not None else 0.0
    best = sorted(per_k, key=lambda k: (-per_k[k]["silhouette"], -per_k[k]["elbow"], k))[0]
    return WardReport(best, labelings[best], per_k, [])


@dataclass
class ApResult:
    exemplars: list[int]
    labels: np.ndarray
    converged: bool
    n_iter: int


def affinity_propagation(X: np.ndarray, damping: float = 0.5,
                         max_iter: int = 500, convergence_iter: int = 20,
                         preference: float | None = None) -> ApResult:
    """Exemplar clustering by message passing over pairwise similarities.

    Ties resolve to the lowest point index; when no exemplar emerges
    (e.g. all points identical) the first index becomes the single
    exemplar. Non-convergence keeps the current exemplars and is flagged.
    """
    n = len(X)
    if n == 0:
        raise ValueError("no points to cluster")
    if n == 1:
        return ApResult([0], np.zeros(1, dtype=int), True, 0)

    S = -cdist(X, X, metric="sqeuclidean")
    if preference is None:
        preference = float(np.median(S))
    np.fill_diagonal(S, preference)

    R = np.zeros((n, n))
    A = np.zeros((n, n))
    idx = np.arange(n)
    prev_exemplars: frozenset[int] = frozenset()
    stable = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # responsibilities
        AS = A + S
        first = AS.argmax(axis=1)
        max1 = AS[idx, first]
        AS[idx, first] = -np.inf
        max2 = AS.max(axis=1)
        Rn = S - max1[:, None]
        Rn[idx, first] = S[idx, first] - max2
        R = damping * R + (1 - damping) * Rn

        # availabilities
        Rp = np.maximum(R, 0)
        np.fill_diagonal(Rp, np.diag(R))
        col = Rp.sum(axis=0)
        An = col[None, :] - Rp
        diag = np.diag(An).copy()
        An = np.minimum(An, 0)
        np.fill_diagonal(An, diag)
        A = damping * A + (1 - damping) * An

        exemplars = frozenset(np.flatnonzero(np.diag(A) + np.diag(R) > 0).tolist())
        if exemplars and exemplars == prev_exemplars:
            stable += 1
            if stable >= convergence_iter:
                converged = True
                break
        else:
            stable = 0
        prev_exemplars = exemplars

    E = sorted(prev_exemplars)
    if not E:
        E = [int(np.argmax(np.diag(A) + np.diag(R)))]
    cols = S[:, E]
    labels = cols.argmax(axis=1)
    for ci, e in enumerate(E):
        labels[e] = ci
    return ApResult(E, labels, converged, it)
