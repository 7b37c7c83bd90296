"""Rolling correlation networks over a return panel.

Edge weights map Pearson correlation onto [0, 1] through A_ij = (rho + 1)/2
with zero diagonal, so a rate and its inverse sit at weight 0 and the
strength of every node in an inverse-paired panel is (n - 2)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateSeriesError
from .panel import ReturnPanel

NETWORK_FORMAT = "corrnets network v1"


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation with a two-pass mean, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("pearson needs two equal-length 1-d series")
    if len(x) < 2:
        raise DataError("pearson needs at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(dx @ dx))
    sy = float(np.sqrt(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise DegenerateSeriesError("zero variance series in correlation")
    return float(np.clip((dx @ dy) / (sx * sy), -1.0, 1.0))


@dataclass
class CorrNetwork:
    """One window's weighted network.

    ``window_start`` indexes the first return step of the window and ``T``
    is the window length in steps.  ``A`` is symmetric with entries in
    [0, 1]; the diagonal is 1 when self-edges are included and 0 otherwise.
    """

    labels: list[str]
    A: np.ndarray
    window_start: int = 0
    T: int = 0
    include_self_edges: bool = False

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        n = len(self.labels)
        if self.A.shape != (n, n):
            raise DataError("adjacency shape does not match labels")
        self.A.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def strengths(self) -> np.ndarray:
        """Row sums; a self-edge counts once toward its node."""
        return self.A.sum(axis=1)

    @property
    def m(self) -> float:
        """Total edge weight: half the off-diagonal sum plus the self-edges."""
        k = self.strengths
        return float((k.sum() + np.trace(self.A)) / 2.0)

    def inverse_index(self) -> np.ndarray:
        from .panel import invert_name

        pos = {name: i for i, name in enumerate(self.labels)}
        out = np.empty(self.n, dtype=int)
        for i, name in enumerate(self.labels):
            inv = invert_name(name)
            if inv not in pos:
                raise DataError(f"network has {name} but not {inv}")
            out[i] = pos[inv]
        return out


def build_network(panel: ReturnPanel, start: int, T: int,
                  include_self_edges: bool = False) -> CorrNetwork:
    """Correlation network over return steps [start, start + T)."""
    if T < 2:
        raise DataError("window length must be at least 2")
    if start < 0 or start + T > panel.n_steps:
        raise DataError(f"window [{start}, {start + T}) outside panel of {panel.n_steps} steps")
    window = panel.returns[:, start:start + T]
    std = window.std(axis=1)
    dead = np.flatnonzero(std == 0.0)
    if len(dead):
        raise DegenerateSeriesError(
            f"{panel.instruments[dead[0]]} has zero variance in window [{start}, {start + T})")
    rho = np.clip(np.corrcoef(window), -1.0, 1.0)
    A = (rho + 1.0) / 2.0
    if include_self_edges:
        np.fill_diagonal(A, 1.0)
    else:
        np.fill_diagonal(A, 0.0)
    return CorrNetwork(list(panel.instruments), A, start, T, include_self_edges)


def null_expectation(net: CorrNetwork, model: str = "ng") -> np.ndarray:
    """Expected edge weight under a null model.

    "ng" uses P_ij = k_i k_j / (2m); "uniform" spreads 2m evenly over the
    n(n-1) ordered off-diagonal pairs.  On an inverse-paired panel the NG
    matrix is itself constant at (n-2)/(2n).
    """
    if model == "ng":
        k = net.strengths
        return np.outer(k, k) / (2.0 * net.m)
    if model == "uniform":
        n = net.n
        return np.full((n, n), 2.0 * net.m / (n * (n - 1)))
    raise DataError(f"unknown null model {model!r}")


@dataclass
class NetworkSequence:
    """Windows of fixed length T whose starts advance by exactly dt steps."""

    networks: list[CorrNetwork]
    T: int
    dt: int

    def __post_init__(self):
        starts = [net.window_start for net in self.networks]
        if any(b - a != self.dt for a, b in zip(starts, starts[1:])):
            raise DataError("window starts must advance by exactly dt")

    def __len__(self) -> int:
        return len(self.networks)

    def __iter__(self):
        return iter(self.networks)

    def __getitem__(self, i: int) -> CorrNetwork:
        return self.networks[i]


def build_sequence(panel: ReturnPanel, T: int, dt: int,
                   include_self_edges: bool = False,
                   max_windows: int | None = None) -> NetworkSequence:
    """All windows [s, s + T) with s = 0, dt, 2*dt, ... fitting the panel."""
    if dt < 1:
        raise DataError("dt must be positive")
    starts = range(0, panel.n_steps - T + 1, dt)
    if max_windows is not None:
        starts = list(starts)[:max_windows]
    nets = [build_network(panel, s, T, include_self_edges) for s in starts]
    if not nets:
        raise DataError(f"panel of {panel.n_steps} steps has no window of length {T}")
    return NetworkSequence(nets, T, dt)


def mean_edge_weight(net: CorrNetwork) -> float:
    """Mean over the off-diagonal upper triangle."""
    iu = np.triu_indices(net.n, k=1)
    return float(net.A[iu].mean())


def edge_weight_std(seq: NetworkSequence) -> np.ndarray:
    """Population standard deviation of off-diagonal weights, one per window."""
    out = np.empty(len(seq))
    for i, net in enumerate(seq):
        iu = np.triu_indices(net.n, k=1)
        out[i] = net.A[iu].std()
    return out


def write_network(path: str, net: CorrNetwork, seed: int | None = None) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        fh.write(f"# {NETWORK_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# window_start={net.window_start}\n")
        fh.write(f"# T={net.T}\n")
        fh.write(f"# self_edges={int(net.include_self_edges)}\n")
        w = csv.writer(fh)
        w.writerow(["node"] + net.labels)
        for i, lab in enumerate(net.labels):
            w.writerow([lab] + [repr(float(v)) for v in net.A[i]])
