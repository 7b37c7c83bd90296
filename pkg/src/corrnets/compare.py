"""Information-theoretic partition comparison and reorganization events.

Entropies use natural logarithms with the 0 * ln 0 = 0 convention, and the
variation of information is normalized by ln(n) so that values live in
[0, 1] regardless of system size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .potts import Partition

EVENTS_FORMAT = "corrnets events v1"

SIGMA_LEVELS = (1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class ConfusionTable:
    """Joint community membership counts between two partitions of one node set."""

    counts: np.ndarray
    n: int

    @classmethod
    def from_partitions(cls, a: Partition, b: Partition) -> "ConfusionTable":
        if a.n != b.n:
            raise DataError("partitions cover different node sets")
        flat = a.assignment * b.K + b.assignment
        counts = np.bincount(flat, minlength=a.K * b.K).reshape(a.K, b.K)
        return cls(counts, a.n)

    def joint(self) -> np.ndarray:
        return self.counts / self.n


def entropy(part: Partition) -> float:
    """Shannon entropy of community sizes, natural log."""
    p = part.sizes() / part.n
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mutual_information(a: Partition, b: Partition) -> float:
    table = ConfusionTable.from_partitions(a, b)
    # marginals come from the integer counts: exact sums keep I(a, b) and
    # I(b, a) bitwise equal, where float marginals differ in the last bit
    pa = table.counts.sum(axis=1) / table.n
    pb = table.counts.sum(axis=0) / table.n
    joint = table.joint()
    mask = joint > 0
    denom = np.outer(pa, pb)[mask]
    vals = joint[mask]
    return float(np.sort(vals * np.log(vals / denom)).sum())


def variation_of_information(a: Partition, b: Partition) -> float:
    """VI = S(a) + S(b) - 2 I(a, b); a metric on partitions."""
    if a.n != b.n:
        raise DataError("partitions cover different node sets")
    if a.same_as(b):
        return 0.0
    return entropy(a) + entropy(b) - 2.0 * mutual_information(a, b)


def norm_vi(a: Partition, b: Partition) -> float:
    """VI normalized by ln(n), so 1 separates singletons from one block."""
    if a.n != b.n:
        raise DataError("partitions cover different node sets")
    if a.n < 2:
        raise DataError("normalization needs at least 2 nodes")
    return variation_of_information(a, b) / float(np.log(a.n))


def autocorrelation(members_t: frozenset | set, members_t_tau: frozenset | set) -> float:
    """Jaccard overlap of one node's community at two times."""
    inter = len(members_t & members_t_tau)
    union = len(members_t | members_t_tau)
    if union == 0:
        raise DataError("autocorrelation of two empty communities")
    return inter / union


def node_autocorrelations(parts: list[Partition], tau: int = 1) -> np.ndarray:
    """a_i(t, tau) for every node and every valid t; shape (len - tau, n)."""
    if tau < 1 or tau >= len(parts):
        raise DataError("tau must satisfy 1 <= tau < number of windows")
    n = parts[0].n
    out = np.empty((len(parts) - tau, n))
    for t in range(len(parts) - tau):
        sets_a = parts[t].member_sets()
        sets_b = parts[t + tau].member_sets()
        for i in range(n):
            out[t, i] = autocorrelation(sets_a[parts[t].assignment[i]],
                                        sets_b[parts[t + tau].assignment[i]])
    return out


@dataclass
class EventSeries:
    """Consecutive-window V-hat values with global sigma thresholds.

    ``times[j]`` is the index of the later window of pair j, and
    ``flags[level]`` lists the times whose V-hat exceeds mean + level * sigma.
    """

    times: np.ndarray
    vhat: np.ndarray
    mean: float
    std: float
    thresholds: dict[int, float]
    flags: dict[int, np.ndarray]


def detect_events(parts: list[Partition]) -> EventSeries:
    """Flag reorganizations as spikes of V-hat between consecutive windows."""
    if len(parts) < 3:
        raise DataError("event detection needs at least 3 windows")
    vhat = np.array([norm_vi(a, b) for a, b in zip(parts, parts[1:])])
    times = np.arange(1, len(parts))
    mean = float(vhat.mean())
    std = float(vhat.std())
    thresholds = {j: mean + j * std for j in SIGMA_LEVELS}
    flags = {j: times[vhat > thresholds[j]] for j in SIGMA_LEVELS}
    return EventSeries(times, vhat, mean, std, thresholds, flags)


def random_reassignment_baseline(part: Partition, moved: int, trials: int = 100,
                                 seed: int = 0) -> float:
    """Mean V-hat after moving `moved` random nodes to random other communities."""
    if not (0 <= moved <= part.n):
        raise DataError("moved must be between 0 and n")
    if part.K < 2 and moved > 0:
        raise DataError("cannot reassign nodes with a single community")
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(trials):
        labels = part.assignment.copy()
        nodes = rng.choice(part.n, size=moved, replace=False)
        for v in nodes:
            options = np.delete(np.arange(part.K), labels[v])
            labels[v] = options[rng.integers(len(options))]
        total += norm_vi(part, Partition.from_labels(labels.tolist()))
    return total / trials


def write_events(path: str, series: EventSeries, window_times: np.ndarray,
                 seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {EVENTS_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# mean={series.mean!r}\n")
        fh.write(f"# std={series.std!r}\n")
        for j in SIGMA_LEVELS:
            fh.write(f"# threshold_{j}={series.thresholds[j]!r}\n")
        w = csv.writer(fh)
        w.writerow(["window_index", "window_start_time", "vhat", "sigma_level"])
        for idx, v in zip(series.times, series.vhat):
            level = 0
            for j in SIGMA_LEVELS:
                if v > series.thresholds[j]:
                    level = j
            w.writerow([int(idx), repr(float(window_times[idx])), repr(float(v)), level])
