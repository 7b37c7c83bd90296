"""Shared builders for synthetic panels, networks, partitions, and trees."""

import heapq
import itertools

import numpy as np
import pytest

from corrnets import network, panel, potts, synth


def factor_panel(groups, length, seed, noise=1.0, hierarchy=0.0, expand=True):
    spec = synth.FactorModelSpec(groups=tuple(groups), length=length, noise=noise,
                                 hierarchy=hierarchy, seed=seed)
    built = synth.generate_panel(spec)
    return panel.expand_inverses(built) if expand else built


def random_network(n, rng, self_edges=False):
    """Symmetric random weights in [0, 1]; not inverse-paired."""
    A = rng.uniform(0.0, 1.0, size=(n, n))
    A = (A + A.T) / 2.0
    np.fill_diagonal(A, 1.0 if self_edges else 0.0)
    labels = [f"C{i}/NUM" for i in range(n)]
    return network.CorrNetwork(labels, A, 0, 0, self_edges)


def random_partition(n, rng, k_max=None):
    labels = rng.integers(0, k_max or n, size=n)
    return potts.Partition.from_labels(labels.tolist())


def pruefer_tree(seq, n):
    """Decode a Pruefer sequence into the edge list of a labeled tree."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    avail = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(avail)
    edges = []
    for v in seq:
        leaf = heapq.heappop(avail)
        edges.append((leaf, v))
        degree[leaf] -= 1
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(avail, v)
    edges.append((heapq.heappop(avail), heapq.heappop(avail)))
    return edges


def brute_mst_weight(d):
    """Minimum spanning weight over all n^(n-2) labeled trees (n <= 7)."""
    n = d.shape[0]
    if n == 1:
        return 0.0
    if n == 2:
        return float(d[0, 1])
    best = np.inf
    for seq in itertools.product(range(n), repeat=n - 2):
        w = sum(d[a, b] for a, b in pruefer_tree(seq, n))
        best = min(best, w)
    return float(best)


def brute_betweenness(d):
    """Count shortest paths by enumerating every simple path (n <= 7)."""
    n = d.shape[0]
    b = np.zeros(n)
    for s in range(n):
        for t in range(n):
            if s == t:
                continue
            best, paths = None, []
            stack = [(s, (s,), 0.0)]
            while stack:
                v, path, dist = stack.pop()
                if v == t:
                    if best is None or dist < best - 1e-9 * max(abs(best), 1.0):
                        best, paths = dist, [path]
                    elif abs(dist - best) <= 1e-9 * max(abs(best), abs(dist), 1.0):
                        paths.append(path)
                    continue
                for u in range(n):
                    if u not in path and np.isfinite(d[v, u]):
                        stack.append((u, path + (u,), dist + d[v, u]))
            if not paths:
                continue
            for path in paths:
                for inner in path[1:-1]:
                    b[inner] += 1.0 / len(paths)
    return b


def two_scale_network(w_pair=0.95, w_super=0.65, w_cross=0.4):
    """8 nodes: 4 tight pairs nested in 2 superblocks; equal strengths."""
    A = np.full((8, 8), w_cross)
    for s in (slice(0, 4), slice(4, 8)):
        A[s, s] = w_super
    for p in range(4):
        s = slice(2 * p, 2 * p + 2)
        A[s, s] = w_pair
    np.fill_diagonal(A, 0.0)
    return network.CorrNetwork([f"C{i}/N" for i in range(8)], A)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
