"""Potts-energy community detection.

The energy of a partition is H(gamma) = -sum_{i != j} J_ij delta(c_i, c_j)
with coupling J_ij = A_ij - gamma * P_ij; self-pairs enter the sum only for
networks that carry self-edges, where they shift H by a partition-independent
constant.  Four minimizers share this energy: a greedy sweep with community
aggregation, simulated annealing, recursive spectral bisection, and exhaustive
enumeration for small n.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError
from .network import CorrNetwork, null_expectation

PARTITION_FORMAT = "corrnets partition v1"

_MOVE_TOL = 1e-12
_BRUTE_MAX_N = 12


@dataclass(frozen=True)
class Partition:
    """Community assignment with ids 0..K-1 in first-appearance order."""

    assignment: np.ndarray
    K: int
    energy: float | None = None
    gamma: float | None = None
    method: str | None = None

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or len(a) == 0:
            raise DataError("assignment must be a non-empty 1-d sequence")
        seen = a[np.sort(np.unique(a, return_index=True)[1])]
        if not np.array_equal(seen, np.arange(self.K)) or a.max() != self.K - 1:
            raise DataError("community ids must be 0..K-1 in first-appearance order")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @classmethod
    def from_labels(cls, labels, energy: float | None = None,
                    gamma: float | None = None, method: str | None = None) -> "Partition":
        """Canonicalize arbitrary hashable labels by first appearance."""
        labels = list(labels)
        ids: dict = {}
        a = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels):
            a[i] = ids.setdefault(lab, len(ids))
        return cls(a, len(ids), energy=energy, gamma=gamma, method=method)

    @property
    def n(self) -> int:
        return len(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.K)

    def communities(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(self.K + 1))
        return [order[bounds[k]:bounds[k + 1]] for k in range(self.K)]

    def member_sets(self, labels: list[str] | None = None) -> list[frozenset]:
        comms = self.communities()
        if labels is None:
            return [frozenset(c.tolist()) for c in comms]
        return [frozenset(labels[i] for i in c) for c in comms]

    def same_as(self, other: "Partition") -> bool:
        return self.n == other.n and np.array_equal(self.assignment, other.assignment)


@dataclass
class EnergyModel:
    """Coupling matrix J = A - gamma * P together with its bookkeeping."""

    coupling: np.ndarray
    gamma: float
    m: float
    include_self_pairs: bool = False

    def __post_init__(self):
        self.coupling = np.asarray(self.coupling, dtype=float)
        n = self.coupling.shape[0]
        if self.coupling.shape != (n, n):
            raise DataError("coupling must be square")
        self.coupling.setflags(write=False)

    @classmethod
    def from_network(cls, net: CorrNetwork, gamma: float, null: str = "ng") -> "EnergyModel":
        P = null_expectation(net, null)
        return cls(net.A - gamma * P, gamma, net.m, net.include_self_edges)

    @property
    def n(self) -> int:
        return self.coupling.shape[0]


def hamiltonian(model: EnergyModel, part: Partition) -> float:
    """H = -sum of J over ordered within-community pairs."""
    J = model.coupling
    if part.n != model.n:
        raise DataError("partition size does not match coupling")
    within = 0.0
    for members in part.communities():
        block = J[np.ix_(members, members)]
        s = float(block.sum())
        if not model.include_self_pairs:
            s -= float(np.trace(block))
        within += s
    return -within


def scaled_energy(model: EnergyModel, part: Partition) -> float:
    """Q_s = -H / (2m); equal to modularity at gamma = 1."""
    return -hamiltonian(model, part) / (2.0 * model.m)


def modularity(net: CorrNetwork, part: Partition) -> float:
    """Q = (1/2m) sum over within-community pairs of (A_ij - P_ij), NG null."""
    if part.n != net.n:
        raise DataError("partition size does not match network")
    P = null_expectation(net, "ng")
    total = 0.0
    for members in part.communities():
        a = net.A[np.ix_(members, members)]
        p = P[np.ix_(members, members)]
        total += float(a.sum() - p.sum())
        if not net.include_self_edges:
            total -= float(np.trace(a) - np.trace(p))
    return total / (2.0 * net.m)


def rescale_gamma_self_edges(gamma: float, n: int) -> float:
    """Resolution that reproduces a no-self-edge run when self-edges are kept."""
    if n < 3:
        raise DataError("rescaling needs n >= 3")
    return gamma * (n + 2) * (n - 2) / (n * n)


# ---------------------------------------------------------------------------
# greedy minimizer


def _offdiag(J: np.ndarray) -> np.ndarray:
    out = J.copy()
    np.fill_diagonal(out, 0.0)
    return out


def _local_move(J: np.ndarray, assign: np.ndarray, rng: np.random.Generator) -> bool:
    """Sweep single-node moves until no move lowers H; returns True if any did.

    J must have a zero diagonal.  Labels are slot indices in 0..n-1; an empty
    slot plays the role of a fresh singleton community.
    """
    n = len(assign)
    changed = False
    while True:
        moved = 0
        for v in rng.permutation(n):
            w = np.bincount(assign, weights=J[v], minlength=n)
            a = assign[v]
            b = int(np.argmax(w))
            if b != a and w[b] > w[a] + _MOVE_TOL:
                assign[v] = b
                moved += 1
        if moved == 0:
            return changed
        changed = True


def _compact(assign: np.ndarray) -> np.ndarray:
    _, out = np.unique(assign, return_inverse=True)
    return out.astype(np.int64)


def _aggregate(J: np.ndarray, assign: np.ndarray, K: int) -> np.ndarray:
    onehot = np.zeros((len(assign), K))
    onehot[np.arange(len(assign)), assign] = 1.0
    J2 = onehot.T @ J @ onehot
    np.fill_diagonal(J2, 0.0)
    return J2


def greedy_minimize(model: EnergyModel, seed: int = 0) -> Partition:
    """Louvain-style descent: node sweeps, then community merges, repeated.

    Node order is a fresh seeded permutation each pass and ties within 1e-12
    keep the current community, so results are reproducible for a given seed.
    """
    rng = np.random.default_rng(seed)
    J0 = _offdiag(model.coupling)
    n = model.n
    assign = np.arange(n)
    while True:
        changed = _local_move(J0, assign, rng)
        merged = False
        while True:
            flat = _compact(assign)
            K = int(flat.max()) + 1
            if K == 1:
                break
            J2 = _aggregate(J0, flat, K)
            agg = np.arange(K)
            if not _local_move(J2, agg, rng):
                break
            merged = True
            assign = _compact(agg)[flat]
        if not changed and not merged:
            break
    part = Partition.from_labels(assign.tolist())
    h = hamiltonian(model, part)
    return Partition(part.assignment, part.K, energy=h, gamma=model.gamma, method="greedy")


# ---------------------------------------------------------------------------
# simulated annealing


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric cooling; None fields fall back to the coupling-scaled defaults."""

    t0: float | None = None
    cooling: float = 0.995
    moves_per_temp: int | None = None
    tmin: float | None = None

    def resolved(self, J: np.ndarray) -> tuple[float, float, int, float]:
        scale = float(np.abs(J).max())
        t0 = self.t0 if self.t0 is not None else (scale if scale > 0 else 1.0)
        moves = self.moves_per_temp if self.moves_per_temp is not None else 50 * J.shape[0]
        tmin = self.tmin if self.tmin is not None else 1e-4 * t0
        if not (t0 > tmin > 0):
            raise ConfigError(f"need t0 > tmin > 0, got t0={t0} tmin={tmin}")
        if not (0 < self.cooling < 1):
            raise ConfigError(f"cooling must be in (0, 1), got {self.cooling}")
        if moves < 1:
            raise ConfigError("moves_per_temp must be positive")
        return t0, self.cooling, int(moves), tmin


def _anneal_kernel(J, assign, t0, cooling, tmin, moves_per_temp, seed):
    np.random.seed(seed)
    n = J.shape[0]
    size = np.zeros(n, dtype=np.int64)
    S = np.zeros((n, n))
    for v in range(n):
        c = assign[v]
        size[c] += 1
        for u in range(n):
            S[u, c] += J[u, v]

    # active community slots, plus a stack of free slots for new singletons
    active = np.empty(n, dtype=np.int64)
    slot_pos = np.full(n, -1, dtype=np.int64)
    n_active = 0
    free = np.empty(n, dtype=np.int64)
    n_free = 0
    for c in range(n):
        if size[c] > 0:
            active[n_active] = c
            slot_pos[c] = n_active
            n_active += 1
        else:
            free[n_free] = c
            n_free += 1

    cur_h = 0.0
    for v in range(n):
        cur_h -= S[v, assign[v]] - J[v, v]
    best_h = cur_h
    best = assign.copy()
    accepted = 0

    T = t0
    while T > tmin:
        for _ in range(moves_per_temp):
            v = np.random.randint(0, n)
            a = assign[v]
            # uniform over existing other communities plus one new singleton
            extra = 1 if size[a] > 1 else 0
            n_opts = n_active - 1 + extra
            if n_opts <= 0:
                continue
            j = np.random.randint(0, n_opts)
            if j < n_active - 1:
                b = active[j]
                if b == a:
                    b = active[n_active - 1]
                d_h = -2.0 * (S[v, b] - (S[v, a] - J[v, v]))
            else:
                b = free[n_free - 1]
                d_h = 2.0 * (S[v, a] - J[v, v])
            if d_h > 0.0 and np.random.random() >= math.exp(-d_h / T):
                continue
            accepted += 1
            cur_h += d_h
            assign[v] = b
            for u in range(n):
                S[u, a] -= J[u, v]
                S[u, b] += J[u, v]
            size[a] -= 1
            size[b] += 1
            if size[b] == 1:
                n_free -= 1
                active[n_active] = b
                slot_pos[b] = n_active
                n_active += 1
            if size[a] == 0:
                p = slot_pos[a]
                last = active[n_active - 1]
                active[p] = last
                slot_pos[last] = p
                slot_pos[a] = -1
                n_active -= 1
                free[n_free] = a
                n_free += 1
            if cur_h < best_h - 1e-12:
                best_h = cur_h
                best[:] = assign
        T *= cooling
    return best, best_h, accepted


try:  # pure-python fallback keeps the package importable without numba
    from numba import njit

    _anneal_kernel = njit(cache=True)(_anneal_kernel)
except ImportError:  # pragma: no cover
    pass


def anneal_minimize(model: EnergyModel, schedule: AnnealSchedule | None = None,
                    seed: int = 0) -> Partition:
    """Metropolis single-node moves under geometric cooling.

    Proposals move one node to a random existing community or a new
    singleton.  The best state seen is returned, so the result never has a
    higher energy than the all-singletons start.
    """
    schedule = schedule or AnnealSchedule()
    J = _offdiag(model.coupling)
    t0, cooling, moves, tmin = schedule.resolved(J)
    if model.n == 1:
        part = Partition(np.zeros(1, dtype=np.int64), 1, energy=0.0,
                         gamma=model.gamma, method="anneal")
        return part
    assign = np.arange(model.n, dtype=np.int64)
    best, _, accepted = _anneal_kernel(np.ascontiguousarray(J), assign, t0, cooling,
                                       tmin, moves, int(seed) & 0xFFFFFFFF)
    part = Partition.from_labels(best.tolist())
    h = hamiltonian(model, part)
    out = Partition(part.assignment, part.K, energy=h, gamma=model.gamma, method="anneal")
    object.__setattr__(out, "accepted_moves", int(accepted))
    return out


# ---------------------------------------------------------------------------
# spectral bisection


def _refine_split(J: np.ndarray, side: np.ndarray) -> np.ndarray:
    """Single-node side flips while the cross-coupling sum keeps decreasing.

    The candidate split's energy change is twice the sum of J over cross
    pairs, so flipping node v changes it by its couplings into the side it
    leaves minus those into the side it joins.  A side is never emptied.
    """
    side = side.copy()
    while True:
        ones = int(side.sum())
        zeros = len(side) - ones
        to_one = J @ side.astype(float)
        to_zero = J.sum(axis=1) - to_one
        gain = np.where(side, to_one - to_zero, to_zero - to_one)
        blocked = np.where(side, ones == 1, zeros == 1)
        gain = np.where(blocked, np.inf, gain)
        v = int(np.argmin(gain))
        if not gain[v] < -_MOVE_TOL:
            return side
        side[v] = not side[v]


def spectral_minimize(model: EnergyModel) -> Partition:
    """Recursive two-way splits along the leading eigenvector of J.

    Each candidate split is polished with single-node flips and accepted only
    if it strictly lowers H; groups recurse until no split helps.
    """
    J0 = _offdiag(model.coupling)
    final: list[np.ndarray] = []
    stack: list[np.ndarray] = [np.arange(model.n)]
    while stack:
        members = stack.pop()
        if len(members) < 2:
            final.append(members)
            continue
        sub = J0[np.ix_(members, members)]
        try:
            vals, vecs = np.linalg.eigh(sub)
        except np.linalg.LinAlgError as exc:
            raise NumericError("eigendecomposition failed during spectral split") from exc
        lead = vecs[:, int(np.argmax(vals))]
        side = _refine_split(sub, lead >= 0.0)
        ones = np.flatnonzero(side)
        zeros = np.flatnonzero(~side)
        if len(ones) == 0 or len(zeros) == 0:
            final.append(members)
            continue
        cross = float(sub[np.ix_(ones, zeros)].sum())
        if 2.0 * cross < -_MOVE_TOL:
            stack.append(members[ones])
            stack.append(members[zeros])
        else:
            final.append(members)
    labels = np.empty(model.n, dtype=np.int64)
    for k, members in enumerate(final):
        labels[members] = k
    part = Partition.from_labels(labels.tolist())
    h = hamiltonian(model, part)
    return Partition(part.assignment, part.K, energy=h, gamma=model.gamma, method="spectral")


# ---------------------------------------------------------------------------
# exhaustive search


_PARTITIONS_CACHE: dict[int, np.ndarray] = {}


def all_partitions(n: int) -> np.ndarray:
    """Every partition of n items as restricted-growth strings, one per row."""
    if n < 1:
        raise DataError("n must be positive")
    if n > _BRUTE_MAX_N:
        raise DataError(f"exhaustive enumeration capped at n={_BRUTE_MAX_N}")
    if n in _PARTITIONS_CACHE:
        return _PARTITIONS_CACHE[n]
    rgs = np.zeros((1, 1), dtype=np.int8)
    mx = np.zeros(1, dtype=np.int8)
    for _ in range(n - 1):
        counts = mx.astype(np.int64) + 2
        total = int(counts.sum())
        parent = np.repeat(np.arange(len(rgs)), counts)
        offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
        newv = (np.arange(total) - offsets[parent]).astype(np.int8)
        rgs = np.concatenate([rgs[parent], newv[:, None]], axis=1)
        mx = np.maximum(mx[parent], newv)
    rgs.setflags(write=False)
    _PARTITIONS_CACHE[n] = rgs
    return rgs


def _within_sums(M: np.ndarray, rgs: np.ndarray) -> np.ndarray:
    """Ordered within-community pair sum of M for every partition row."""
    n = M.shape[0]
    w = np.zeros(len(rgs))
    for i in range(n):
        for j in range(i + 1, n):
            if M[i, j] != 0.0:
                w += (2.0 * M[i, j]) * (rgs[:, i] == rgs[:, j])
    return w


def brute_force(model: EnergyModel) -> Partition:
    """Global minimum of H by enumerating all partitions (n <= 12)."""
    rgs = all_partitions(model.n)
    w = _within_sums(_offdiag(model.coupling), rgs)
    idx = int(np.argmax(w))
    part = Partition.from_labels(rgs[idx].tolist())
    h = hamiltonian(model, part)
    return Partition(part.assignment, part.K, energy=h, gamma=model.gamma, method="brute")


HEURISTICS = {
    "greedy": lambda model, seed: greedy_minimize(model, seed=seed),
    "anneal": lambda model, seed: anneal_minimize(model, seed=seed),
    "spectral": lambda model, seed: spectral_minimize(model),
    "brute": lambda model, seed: brute_force(model),
}


def minimize(model: EnergyModel, heuristic: str = "greedy", seed: int = 0) -> Partition:
    try:
        fn = HEURISTICS[heuristic]
    except KeyError:
        raise ConfigError(f"unknown heuristic {heuristic!r}") from None
    return fn(model, seed)


# ---------------------------------------------------------------------------
# serialization


def write_partition(path: str, part: Partition, labels: list[str],
                    q_s: float | None = None, seed: int | None = None) -> None:
    if len(labels) != part.n:
        raise DataError("label count does not match partition size")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {PARTITION_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# gamma={'' if part.gamma is None else repr(part.gamma)}\n")
        fh.write(f"# method={part.method or ''}\n")
        fh.write(f"# H={'' if part.energy is None else repr(part.energy)}\n")
        fh.write(f"# Qs={'' if q_s is None else repr(q_s)}\n")
        w = csv.writer(fh)
        w.writerow(["node", "community"])
        for lab, c in zip(labels, part.assignment):
            w.writerow([lab, int(c)])


def read_partition(path: str) -> tuple[Partition, list[str], dict[str, str]]:
    meta: dict[str, str] = {}
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.strip() != f"# {PARTITION_FORMAT}":
            raise DataError(f"{path}: not a {PARTITION_FORMAT} file")
        pos = fh.tell()
        line = fh.readline()
        while line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
            pos = fh.tell()
            line = fh.readline()
        fh.seek(pos)
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["node", "community"]:
        raise DataError(f"{path}: missing node,community header")
    labels = [r[0] for r in rows[1:]]
    ids = [int(r[1]) for r in rows[1:]]
    part = Partition.from_labels(ids,
                                 energy=float(meta["H"]) if meta.get("H") else None,
                                 gamma=float(meta["gamma"]) if meta.get("gamma") else None,
                                 method=meta.get("method") or None)
    return part, labels, meta
