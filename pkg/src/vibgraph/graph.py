"""Pairwise DTW distances between segments and weighted fault-graph construction."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

DEFAULT_PAIR_BUDGET = 2_000_000
DEFAULT_THETA_PERCENTILE = 20.0


def dtw_distance(a, b) -> float:
    """Classic dynamic-programming DTW with |a_k - b_l| local cost, full window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("dtw_distance: empty input sequence")
    n, m = a.size, b.size
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    cost = np.abs(a[:, None] - b[None, :])
    for i in range(1, n + 1):
        row = cost[i - 1]
        prev = D[i - 1]
        cur = D[i]
        for j in range(1, m + 1):
            cur[j] = row[j - 1] + min(prev[j], cur[j - 1], prev[j - 1])
    return float(D[n, m])


def similarity(distance: float) -> float:
    """Edge weight 1/(1 + D), strictly decreasing in D, range (0, 1]."""
    if distance < 0:
        raise ValueError("distance must be non-negative")
    return 1.0 / (1.0 + distance)


class PairBudgetError(RuntimeError):
    pass


@dataclass
class PairwiseDistances:
    """Condensed upper-triangular store of all m*(m-1)/2 DTW distances."""

    m: int
    condensed: np.ndarray

    def index(self, i: int, j: int) -> int:
        if i == j:
            raise IndexError("no self-distance stored")
        if i > j:
            i, j = j, i
        return i * self.m - (i * (i + 1)) // 2 + (j - i - 1)

    def get(self, i: int, j: int) -> float:
        return float(self.condensed[self.index(i, j)])

    def full_matrix(self) -> np.ndarray:
        out = np.zeros((self.m, self.m))
        iu = np.triu_indices(self.m, k=1)
        out[iu] = self.condensed
        out[(iu[1], iu[0])] = self.condensed
        return out


def _batched_dtw_equal_length(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """DTW distances for P aligned pairs of equal-length sequences.

    A, B have shape (P, w). The DP runs over the w x w grid with the pair
    axis vectorized.
    """
    P, w = A.shape
    cost = np.abs(A[:, :, None] - B[:, None, :])
    D = np.full((P, w + 1, w + 1), np.inf)
    D[:, 0, 0] = 0.0
    for i in range(1, w + 1):
        c = cost[:, i - 1]
        prev = D[:, i - 1]
        cur = D[:, i]
        for j in range(1, w + 1):
            cur[:, j] = c[:, j - 1] + np.minimum(
                np.minimum(prev[:, j], cur[:, j - 1]), prev[:, j - 1])
    return D[:, w, w]


def pairwise_distances(segments, max_pairs_budget: int = DEFAULT_PAIR_BUDGET,
                       chunk: int = 4096) -> PairwiseDistances:
    """All-pairs DTW distances, condensed. Fails loudly if the pair count
    exceeds the budget rather than silently subsampling."""
    values = [np.asarray(getattr(s, "values", s), dtype=np.float64) for s in segments]
    m = len(values)
    if m < 2:
        raise ValueError("pairwise_distances needs at least 2 segments")
    n_pairs = m * (m - 1) // 2
    if n_pairs > max_pairs_budget:
        raise PairBudgetError(
            f"{n_pairs} segment pairs exceed the budget of {max_pairs_budget}; "
            "raise the segmentation stride or cap the segment count")

    lengths = {v.size for v in values}
    condensed = np.empty(n_pairs)
    ii, jj = np.triu_indices(m, k=1)
    if len(lengths) == 1:
        stacked = np.vstack(values)
        for lo in range(0, n_pairs, chunk):
            hi = min(lo + chunk, n_pairs)
            condensed[lo:hi] = _batched_dtw_equal_length(
                stacked[ii[lo:hi]], stacked[jj[lo:hi]])
    else:
        for k in range(n_pairs):
            condensed[k] = dtw_distance(values[ii[k]], values[jj[k]])
    return PairwiseDistances(m=m, condensed=condensed)


def threshold_from_percentile(distances, pct: float) -> float:
    """Edge threshold as a percentile (linear interpolation) of observed distances."""
    if not 0 < pct <= 100:
        raise ValueError("pct must be in (0, 100]")
    arr = distances.condensed if isinstance(distances, PairwiseDistances) \
        else np.asarray(distances, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no distances to take a percentile of")
    return float(np.percentile(arr, pct))


@dataclass
class FaultGraph:
    """Weighted similarity graph over segments.

    ``edges`` holds (i, j, weight) with i < j and weight = 1/(1+D). ``meta``
    records construction parameters (w_star, step, theta, source_id, scaler).
    """

    node_features: np.ndarray
    node_labels: np.ndarray
    edges: list
    meta: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    def neighbor_mask(self, include_self: bool = True) -> np.ndarray:
        """Boolean m x m adjacency mask, optionally with self-loops."""
        m = self.num_nodes
        mask = np.zeros((m, m), dtype=bool)
        for i, j, _ in self.edges:
            mask[i, j] = True
            mask[j, i] = True
        if include_self:
            np.fill_diagonal(mask, True)
        return mask

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def build_graph(segments, features, labels, theta: float,
                distances: PairwiseDistances | None = None,
                max_pairs_budget: int = DEFAULT_PAIR_BUDGET,
                meta: dict | None = None) -> FaultGraph:
    """Connect every segment pair with DTW distance strictly below ``theta``.

    Nodes left isolated by the threshold get one fallback edge to their
    nearest DTW neighbor so message passing reaches every node.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    m = features.shape[0]
    if m == 0:
        raise ValueError("build_graph: zero segments")
    if not (m == len(labels) == len(segments)):
        raise ValueError(
            f"row counts disagree: {m} feature rows, {len(labels)} labels, "
            f"{len(segments)} segments")
    if distances is None:
        distances = pairwise_distances(segments, max_pairs_budget)
    if distances.m != m:
        raise ValueError("distance store does not match segment count")

    D = distances.full_matrix()
    edge_set = {}
    iu, ju = np.triu_indices(m, k=1)
    below = D[iu, ju] < theta
    for i, j in zip(iu[below], ju[below]):
        edge_set[(int(i), int(j))] = similarity(D[i, j])

    # fallback for isolated nodes: one edge to the nearest DTW neighbor
    connected = np.zeros(m, dtype=bool)
    for i, j in edge_set:
        connected[i] = connected[j] = True
    Dd = D.copy()
    np.fill_diagonal(Dd, np.inf)
    for i in np.flatnonzero(~connected):
        j = int(np.argmin(Dd[i]))
        key = (min(i, j), max(i, j))
        edge_set.setdefault(key, similarity(D[i, j]))

    edges = [(i, j, edge_set[(i, j)]) for i, j in sorted(edge_set)]
    return FaultGraph(node_features=features, node_labels=labels, edges=edges,
                      meta=dict(meta or {}, theta=float(theta)))


# ---------------------------------------------------------------------------
# graph file format (JSON, one file per graph)


def atomic_write_text(path, text):
    """Write-temp-then-rename so readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_graph(graph: FaultGraph, path: str) -> None:
    doc = {
        "meta": graph.meta,
        "features": [row.tolist() for row in graph.node_features],
        "labels": graph.node_labels.tolist(),
        "edges": [[int(i), int(j), float(w)] for i, j, w in graph.edges],
    }
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True))


def load_graph(path: str) -> FaultGraph:
    with open(path) as fh:
        doc = json.load(fh)
    return FaultGraph(
        node_features=np.asarray(doc["features"], dtype=np.float64),
        node_labels=np.asarray(doc["labels"], dtype=np.int64),
        edges=[(int(i), int(j), float(w)) for i, j, w in doc["edges"]],
        meta=doc.get("meta", {}),
    )
