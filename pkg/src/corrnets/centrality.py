"""Node roles: weighted betweenness and community-aligned eigenvector projections.

Strong edges are short: d_ij = 1/A_ij with d = 0 for unit-weight edges.
Community centrality projects each node's spectral position onto the summed
vector of its own community, so y_i = |x_i| cos(theta) never exceeds |x_i|.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DataError
from .network import CorrNetwork
from .potts import EnergyModel, Partition

ROLES_FORMAT = "corrnets roles v1"

_TIE_REL_TOL = 1e-9
_EIG_EPS_REL = 1e-10


def distance_matrix(net: CorrNetwork) -> np.ndarray:
    """d_ij = 1/A_ij, 0 on the diagonal and for unit weights, inf at A = 0."""
    with np.errstate(divide="ignore"):
        d = 1.0 / net.A
    d[net.A == 1.0] = 0.0
    np.fill_diagonal(d, 0.0)
    return d


def _close(a: float, b: float) -> bool:
    if not (np.isfinite(a) and np.isfinite(b)):
        return False
    return abs(a - b) <= _TIE_REL_TOL * max(abs(a), abs(b))


def betweenness_from_distances(d: np.ndarray) -> np.ndarray:
    """Shortest-path betweenness over ordered source/target pairs.

    Path-length ties are resolved within a relative tolerance of 1e-9;
    behavior for zero-length cycles follows the deterministic settle order
    of Dijkstra's algorithm and is fragile by construction.
    """
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    if d.shape != (n, n):
        raise DataError("distance matrix must be square")
    b = np.zeros(n)
    for s in range(n):
        dist = np.full(n, np.inf)
        sigma = np.zeros(n)
        preds: list[list[int]] = [[] for _ in range(n)]
        settled = np.zeros(n, dtype=bool)
        order: list[int] = []
        dist[s] = 0.0
        sigma[s] = 1.0
        heap = [(0.0, s)]
        while heap:
            du, u = heapq.heappop(heap)
            if settled[u]:
                continue
            settled[u] = True
            order.append(u)
            for v in range(n):
                w = d[u, v]
                if v == u or settled[v] or not np.isfinite(w):
                    continue
                nd = du + w
                if nd < dist[v] and not _close(nd, dist[v]):
                    dist[v] = nd
                    sigma[v] = sigma[u]
                    preds[v] = [u]
                    heapq.heappush(heap, (nd, v))
                elif _close(nd, dist[v]):
                    if u not in preds[v]:
                        sigma[v] += sigma[u]
                        preds[v].append(u)
        delta = np.zeros(n)
        for v in reversed(order):
            for u in preds[v]:
                delta[u] += sigma[u] / sigma[v] * (1.0 + delta[v])
            if v != s:
                b[v] += delta[v]
    return b


def betweenness(net: CorrNetwork) -> np.ndarray:
    return betweenness_from_distances(distance_matrix(net))


@dataclass
class NodeVectors:
    """Spectral positions from the positive part of J = U diag(beta) U^T.

    ``vectors`` has one row per node; column j is scaled by sqrt(beta_j) for
    the eigenvalues kept (descending, above the relative cutoff).
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def q(self) -> int:
        return len(self.eigenvalues)

    def norms(self) -> np.ndarray:
        if self.q == 0:
            return np.zeros(self.vectors.shape[0])
        return np.sqrt((self.vectors ** 2).sum(axis=1))


def node_vectors(model: EnergyModel) -> NodeVectors:
    """Eigendecompose J and keep components with beta above 1e-10 * max |beta|."""
    vals, vecs = np.linalg.eigh(model.coupling)
    cutoff = _EIG_EPS_REL * float(np.abs(vals).max()) if len(vals) else 0.0
    keep = np.flatnonzero(vals > cutoff)[::-1]  # descending
    if len(keep) == 0:
        return NodeVectors(np.empty(0), np.zeros((model.n, 0)))
    beta = vals[keep]
    x = vecs[:, keep] * np.sqrt(beta)
    return NodeVectors(beta, x)


def projected_centrality(vectors: NodeVectors, part: Partition,
                         ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-node (y, cos theta, degenerate) against the own-community vector.

    y_i is the projection of x_i on the unit community vector w-hat; both y
    and cos theta are 0 where |w| or |x| vanish, with the degenerate mask
    marking zero-|w| communities.
    """
    n = vectors.vectors.shape[0]
    if part.n != n:
        raise DataError("partition size does not match vectors")
    y = np.zeros(n)
    cos = np.zeros(n)
    degenerate = np.zeros(n, dtype=bool)
    norms = vectors.norms()
    for members in part.communities():
        w = vectors.vectors[members].sum(axis=0)
        wnorm = float(np.sqrt(w @ w))
        if wnorm == 0.0:
            degenerate[members] = True
            continue
        proj = vectors.vectors[members] @ (w / wnorm)
        y[members] = proj
        ok = norms[members] > 0
        cos[members[ok]] = proj[ok] / norms[members[ok]]
    return y, cos, degenerate


def normalize_per_window(values: np.ndarray) -> np.ndarray:
    """Divide by the maximum; an all-zero window stays zero."""
    values = np.asarray(values, dtype=float)
    top = values.max() if len(values) else 0.0
    if top == 0.0:
        return np.zeros_like(values)
    return values / top


def zscores(values: np.ndarray, part: Partition) -> tuple[np.ndarray, np.ndarray]:
    """Within-community z-scores with population sigma.

    Communities of one node get NaN (undefined); zero-sigma communities get
    z = 0 and are marked in the returned degenerate mask.
    """
    values = np.asarray(values, dtype=float)
    if len(values) != part.n:
        raise DataError("value count does not match partition size")
    z = np.full(part.n, np.nan)
    degenerate = np.zeros(part.n, dtype=bool)
    for members in part.communities():
        if len(members) < 2:
            continue
        mu = values[members].mean()
        sigma = values[members].std()
        if sigma == 0.0:
            z[members] = 0.0
            degenerate[members] = True
        else:
            z[members] = (values[members] - mu) / sigma
    return z, degenerate


@dataclass(frozen=True)
class RoleRecord:
    """One node's role figures within one window."""

    node: str
    window: int
    community: int
    community_size: int
    b: float
    x_norm: float
    y: float
    cos_theta: float
    zb: float | None
    zy: float | None


def compute_roles(net: CorrNetwork, part: Partition, gamma: float,
                  null: str = "ng", window: int = 0) -> list[RoleRecord]:
    """Betweenness plus eigenvector projections, normalized per window.

    |x| and y are scaled by their window maxima; z-scores are taken within
    communities and left undefined for singletons.
    """
    if part.n != net.n:
        raise DataError("partition size does not match network")
    model = EnergyModel.from_network(net, gamma, null=null)
    vectors = node_vectors(model)
    b = betweenness(net)
    y, cos, _ = projected_centrality(vectors, part)
    xn = normalize_per_window(vectors.norms())
    yn = normalize_per_window(y)
    zb, _ = zscores(b, part)
    zy, _ = zscores(y, part)
    sizes = part.sizes()
    out = []
    for i, lab in enumerate(net.labels):
        c = int(part.assignment[i])
        out.append(RoleRecord(
            node=lab, window=window, community=c, community_size=int(sizes[c]),
            b=float(b[i]), x_norm=float(xn[i]), y=float(yn[i]), cos_theta=float(cos[i]),
            zb=None if np.isnan(zb[i]) else float(zb[i]),
            zy=None if np.isnan(zy[i]) else float(zy[i])))
    return out


def _bucket_label(bucket: str, window: int, when: float | None, bins: dict | None) -> str:
    if bucket == "window-bins":
        return f"bin{bins[window]}" if bins else f"bin{window}"
    if when is None:
        raise DataError(f"bucket {bucket!r} needs window times")
    dt = datetime.fromtimestamp(when * 3600.0, tz=timezone.utc)
    if bucket == "year":
        return str(dt.year)
    if bucket == "quarter":
        return f"{dt.year}Q{(dt.month - 1) // 3 + 1}"
    raise DataError(f"unknown bucket {bucket!r}")


def aggregate_roles(records: list[RoleRecord], bucket: str = "year",
                    window_times: dict[int, float] | None = None,
                    bins: int | None = None) -> list[dict]:
    """Mean and sigma of (zb, zy) per node per bucket, skipping undefined values.

    ``bucket`` is "year", "quarter", or "window-bins"; the calendar buckets
    need a window -> epoch-hour map, window-bins splits the window range into
    ``bins`` equal-count groups.
    """
    if not records:
        return []
    bin_of = None
    if bucket == "window-bins":
        if not bins or bins < 1:
            raise DataError("window-bins bucketing needs a positive bin count")
        windows = sorted({r.window for r in records})
        bin_of = {}
        for b, chunk in enumerate(np.array_split(np.array(windows), bins)):
            for wdx in chunk:
                bin_of[int(wdx)] = b
    grouped: dict[tuple[str, str], dict[str, list[float]]] = {}
    for r in records:
        when = window_times.get(r.window) if window_times else None
        key = (r.node, _bucket_label(bucket, r.window, when, bin_of))
        cell = grouped.setdefault(key, {"zb": [], "zy": []})
        if r.zb is not None:
            cell["zb"].append(r.zb)
        if r.zy is not None:
            cell["zy"].append(r.zy)
    out = []
    for (node, label) in sorted(grouped):
        cell = grouped[(node, label)]
        row: dict = {"node": node, "bucket": label,
                     "count_zb": len(cell["zb"]), "count_zy": len(cell["zy"])}
        for name in ("zb", "zy"):
            vals = np.array(cell[name])
            row[f"mean_{name}"] = float(vals.mean()) if len(vals) else None
            row[f"std_{name}"] = float(vals.std()) if len(vals) else None
        out.append(row)
    return out


def binned_relation(x: np.ndarray, y: np.ndarray, bins: int,
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equal-count bins on x: per-bin mean x, mean y, standard error of y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("binned relation needs two equal-length 1-d arrays")
    if not (1 <= bins <= len(x)):
        raise DataError("bin count must be between 1 and len(x)")
    order = np.argsort(x, kind="stable")
    mx, my, se = [], [], []
    for chunk in np.array_split(order, bins):
        mx.append(float(x[chunk].mean()))
        my.append(float(y[chunk].mean()))
        se.append(float(y[chunk].std(ddof=1) / np.sqrt(len(chunk))) if len(chunk) > 1 else 0.0)
    return np.array(mx), np.array(my), np.array(se)


def write_roles(path: str, records: list[RoleRecord], seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {ROLES_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        w = csv.writer(fh)
        w.writerow(["window", "node", "community", "community_size",
                    "b", "x_norm", "y", "cos_theta", "zb", "zy"])
        for r in records:
            w.writerow([r.window, r.node, r.community, r.community_size,
                        repr(r.b), repr(r.x_norm), repr(r.y), repr(r.cos_theta),
                        "" if r.zb is None else repr(r.zb),
                        "" if r.zy is None else repr(r.zy)])


def read_roles(path: str) -> list[RoleRecord]:
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.strip() != f"# {ROLES_FORMAT}":
            raise DataError(f"{path}: not a {ROLES_FORMAT} file")
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["window", "node"]:
        raise DataError(f"{path}: missing roles header")
    out = []
    for r in rows[1:]:
        out.append(RoleRecord(node=r[1], window=int(r[0]), community=int(r[2]),
                              community_size=int(r[3]), b=float(r[4]), x_norm=float(r[5]),
                              y=float(r[6]), cos_theta=float(r[7]),
                              zb=float(r[8]) if r[8] else None,
                              zy=float(r[9]) if r[9] else None))
    return out
