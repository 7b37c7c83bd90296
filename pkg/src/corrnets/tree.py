"""Minimum spanning trees and hierarchical clustering on correlation distances.

The metric is d_ij = sqrt(2 (1 - rho_ij)), so d runs from 0 at perfect
correlation to 2 at perfect anticorrelation.  Single linkage reproduces the
MST's edge weights as its merge distances; average linkage uses the exact
Lance-Williams update for the mean pairwise distance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .potts import Partition

TREE_FORMAT = "corrnets tree v1"
DENDRO_FORMAT = "corrnets dendrogram v1"


def ultrametric_distance(rho: np.ndarray) -> np.ndarray:
    """sqrt(2 (1 - rho)) with a zero diagonal; rho must lie in [-1, 1]."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho > 1.0) or np.any(rho < -1.0):
        raise DataError("correlations must lie in [-1, 1]")
    d = np.sqrt(np.maximum(2.0 * (1.0 - rho), 0.0))
    np.fill_diagonal(d, 0.0)
    return d


def network_distance(A: np.ndarray) -> np.ndarray:
    """Distance matrix from edge weights via rho = 2 A - 1."""
    return ultrametric_distance(2.0 * np.asarray(A, dtype=float) - 1.0)


@dataclass(frozen=True)
class SpanningTree:
    """n - 1 edges as (i, j, distance) with i < j, sorted as added."""

    n: int
    edges: list[tuple[int, int, float]]

    @property
    def total_weight(self) -> float:
        return float(sum(e[2] for e in self.edges))


def mst(d: np.ndarray) -> SpanningTree:
    """Kruskal's algorithm; ties broken by lexicographic (i, j) order."""
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n):
        raise DataError("distance matrix must be square")
    if n < 1:
        raise DataError("empty distance matrix")
    edges = sorted((float(d[i, j]), i, j) for i in range(n) for j in range(i + 1, n)
                   if np.isfinite(d[i, j]))
    parent = list(range(n))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    picked = []
    for w, i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            picked.append((i, j, w))
            if len(picked) == n - 1:
                break
    if len(picked) != n - 1:
        raise DataError("distance matrix is not connected")
    return SpanningTree(n, picked)


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge list: leaves are 0..n-1, merge t creates id n + t.

    Each merge is (a, b, distance) with a < b; distances are non-decreasing.
    """

    n: int
    merges: list[tuple[int, int, float]]

    def __post_init__(self):
        dists = [m[2] for m in self.merges]
        if any(b < a - 1e-12 for a, b in zip(dists, dists[1:])):
            raise DataError("merge distances must be non-decreasing")

    def heights(self) -> np.ndarray:
        return np.array([m[2] for m in self.merges])


def linkage(d: np.ndarray, mode: str = "single") -> Dendrogram:
    """Agglomerate by nearest clusters under single or average linkage.

    Ties pick the pair whose smallest leaves come first.  The average update
    is the exact size-weighted mean, so it matches a direct recomputation
    from the raw distances.
    """
    if mode not in ("single", "average"):
        raise DataError(f"unknown linkage mode {mode!r}")
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n):
        raise DataError("distance matrix must be square")
    D = d.astype(float).copy()
    np.fill_diagonal(D, np.inf)
    alive = list(range(n))
    ids = list(range(n))
    min_leaf = list(range(n))
    sizes = [1] * n
    merges = []
    for step in range(n - 1):
        best = None
        for ai in range(len(alive)):
            for bi in range(ai + 1, len(alive)):
                a, b = alive[ai], alive[bi]
                la, lb = sorted((min_leaf[a], min_leaf[b]))
                key = (D[a, b], la, lb)
                if best is None or key < best[0]:
                    best = (key, ai, bi)
        (_, ai, bi) = best
        a, b = alive[ai], alive[bi]
        dist = float(D[a, b])
        ida, idb = sorted((ids[a], ids[b]))
        merges.append((ida, idb, dist))
        # fold b into a, then retire b
        for c in alive:
            if c in (a, b):
                continue
            if mode == "single":
                D[a, c] = D[c, a] = min(D[a, c], D[b, c])
            else:
                D[a, c] = D[c, a] = (sizes[a] * D[a, c] + sizes[b] * D[b, c]) \
                    / (sizes[a] + sizes[b])
        sizes[a] += sizes[b]
        min_leaf[a] = min(min_leaf[a], min_leaf[b])
        ids[a] = n + step
        alive.pop(bi)
    return Dendrogram(n, merges)


def cut(dendro: Dendrogram, height: float) -> Partition:
    """Clusters joined by every merge with distance strictly below height."""
    parent = list(range(dendro.n))

    def find(v: int) -> int:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    reps = {i: i for i in range(dendro.n)}  # cluster id -> a member leaf
    for step, (a, b, dist) in enumerate(dendro.merges):
        la, lb = reps[a], reps[b]
        reps[dendro.n + step] = la
        if dist < height:
            parent[find(lb)] = find(la)
    return Partition.from_labels([find(i) for i in range(dendro.n)])


def robust_interval(dendro: Dendrogram, reference: Partition,
                    ) -> tuple[float, float] | None:
    """Height bracket over which cutting reproduces the reference partition.

    Returns (lo, hi) where any height in (lo, hi] gives the reference, with
    lo = 0 for the all-singletons partition and hi = inf above the last
    merge; None if no cut level matches.
    """
    if reference.n != dendro.n:
        raise DataError("reference partition size does not match dendrogram")
    heights = sorted(set(m[2] for m in dendro.merges))
    levels = [0.0] + heights
    tops = heights + [math.inf]
    for lo, hi in zip(levels, tops):
        if hi <= lo:
            continue
        # heights in (lo, hi] activate exactly the merges with distance <= lo
        probe = lo + (1.0 if math.isinf(hi) else (hi - lo) / 2.0)
        if cut(dendro, probe).same_as(reference):
            return (lo, hi)
    return None


def write_tree(path: str, tree: SpanningTree, labels: list[str],
               window_start: int = 0, seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {TREE_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# window_start={window_start}\n")
        fh.write(f"# total_weight={tree.total_weight!r}\n")
        w = csv.writer(fh)
        w.writerow(["i", "j", "node_i", "node_j", "distance"])
        for i, j, dist in tree.edges:
            w.writerow([i, j, labels[i], labels[j], repr(dist)])


def write_dendrogram(path: str, dendro: Dendrogram, mode: str,
                     window_start: int = 0, seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {DENDRO_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# window_start={window_start}\n")
        fh.write(f"# mode={mode}\n")
        fh.write(f"# leaves={dendro.n}\n")
        w = csv.writer(fh)
        w.writerow(["step", "a", "b", "distance"])
        for step, (a, b, dist) in enumerate(dendro.merges):
            w.writerow([step, a, b, repr(dist)])
