"""Dataset imputation and graph analytics."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .core import DataError, Dataset, _readonly


@dataclass(frozen=True, eq=False)
class CentralityReport:
    """Per-node degree, betweenness and closeness."""

    names: tuple
    degree: np.ndarray
    betweenness: np.ndarray
    closeness: np.ndarray

    def __post_init__(self):
        for name in ("degree", "betweenness", "closeness"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))


def _adjacency_of(graph) -> np.ndarray:
    if isinstance(graph, np.ndarray):
        adj = np.asarray(graph, dtype=bool)
    else:
        adj = np.asarray(graph.adjacency, dtype=bool)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise DataError("adjacency must be square")
    return adj


def gower_distances(target: np.ndarray, observed: np.ndarray,
                    candidates: np.ndarray, kinds, ranges) -> np.ndarray:
    """Gower distance from one (partially observed) row to candidate rows:
    range-normalized absolute difference for numeric columns, plain mismatch
    for binary ones, averaged over the target's observed columns."""
    usable = np.flatnonzero(observed)
    if usable.size == 0:
        return np.zeros(candidates.shape[0])
    total = np.zeros(candidates.shape[0])
    for c in usable:
        diff = np.abs(candidates[:, c] - target[c])
        if kinds[c] == "binary":
            total += (diff > 0).astype(float)
        else:
            total += diff / ranges[c] if ranges[c] > 0 else 0.0
    return total / usable.size


def knn_impute(dataset: Dataset, k: int = 13) -> Dataset:
    """Replace each missing value by the column median of the k closest
    complete rows under Gower distance; distance ties break by row index.

    Binary medians that land between the classes (possible for even k)
    resolve to the column's majority value over all complete rows.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    mask = dataset.missing_mask
    if not mask.any():
        return dataset
    values = np.array(dataset.values, copy=True)
    complete = np.flatnonzero(~mask.any(axis=1))
    if complete.size < k:
        raise DataError(f"imputation needs at least k={k} complete rows, "
                        f"found {complete.size}")
    kinds = [s.kind for s in dataset.schema]
    ranges = np.zeros(dataset.p)
    for c in range(dataset.p):
        col = dataset.column(c)
        ranges[c] = float(col.max() - col.min())
    cand = values[complete]
    for i in np.flatnonzero(mask.any(axis=1)):
        dists = gower_distances(values[i], ~mask[i], cand, kinds, ranges)
        nearest = complete[np.argsort(dists, kind="stable")[:k]]
        for c in np.flatnonzero(mask[i]):
            med = float(np.median(values[nearest, c]))
            if kinds[c] == "binary" and med not in (0.0, 1.0):
                ones = float(np.sum(values[complete, c]))
                med = 1.0 if ones > complete.size / 2 else 0.0
            values[i, c] = med
    return Dataset(values, dataset.schema, None, dataset.standardization)


def centrality(graph, names=None) -> CentralityReport:
    """Degree, betweenness and closeness on the unweighted graph.

    Betweenness counts shortest-path intermediation per unordered pair
    (unnormalized); closeness is scaled by reachable-set size so isolated
    nodes score zero.
    """
    adj = _adjacency_of(graph)
    p = adj.shape[0]
    names = tuple(names) if names else tuple(f"V{i + 1}" for i in range(p))
    g = nx.Graph()
    g.add_nodes_from(range(p))
    g.add_edges_from(zip(*np.nonzero(np.triu(adj, 1))))
    degree = adj.sum(axis=0).astype(int)
    btw = nx.betweenness_centrality(g, normalized=False)
    cls = nx.closeness_centrality(g, wf_improved=True)
    return CentralityReport(tuple(names),
                            degree,
                            np.asarray([btw[i] for i in range(p)]),
                            np.asarray([cls[i] for i in range(p)]))


def weighted_centrality(graph, names=None) -> CentralityReport:
    """Centrality with edge distance 1/strength instead of unit lengths."""
    adj = _adjacency_of(graph)
    strength = np.asarray(graph.strength, dtype=float)
    p = adj.shape[0]
    names = tuple(names) if names else tuple(f"V{i + 1}" for i in range(p))
    g = nx.Graph()
    g.add_nodes_from(range(p))
    for j, k in zip(*np.nonzero(np.triu(adj, 1))):
        g.add_edge(int(j), int(k), distance=1.0 / strength[j, k])
    degree = adj.sum(axis=0).astype(int)
    btw = nx.betweenness_centrality(g, normalized=False, weight="distance")
    cls = nx.closeness_centrality(g, distance="distance", wf_improved=True)
    return CentralityReport(tuple(names),
                            degree,
                            np.asarray([btw[i] for i in range(p)]),
                            np.asarray([cls[i] for i in range(p)]))


def hamming_distance(g1, g2) -> float:
    """Fraction of unordered node pairs whose edge indicators disagree."""
    a = _adjacency_of(g1)
    b = _adjacency_of(g2)
    if a.shape != b.shape:
        raise DataError("graphs must have the same number of nodes")
    iu = np.triu_indices(a.shape[0], 1)
    return float(np.mean(a[iu] != b[iu]))
