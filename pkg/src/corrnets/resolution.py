"""Resolution sweeps, plateau detection, and the fixed working resolution.

A plateau is a maximal run of grid points whose detected partitions are
exactly equal; the main plateau is the widest one whose community count is
strictly between 2 and n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .compare import entropy, norm_vi
from .errors import AnalysisError, ConfigError, DataError
from .network import CorrNetwork
from .potts import EnergyModel, Partition, minimize, modularity

SWEEP_FORMAT = "corrnets sweep v1"

_GRID_LO = 0.6
_GRID_STEP = 0.015
_GRID_POINTS = 100


def default_gamma_grid() -> np.ndarray:
    """100 resolutions on [0.6, 2.1] spaced 0.015 apart."""
    return np.round(_GRID_LO + _GRID_STEP * np.arange(_GRID_POINTS), 10)


@dataclass(frozen=True)
class GammaStats:
    gamma: float
    n_communities: int
    entropy: float
    modularity_q: float
    energy: float
    dh_dgamma: float
    vhat_prev: float


@dataclass
class ResolutionSweep:
    """Partitions and summary statistics over a gamma grid for one network."""

    gammas: np.ndarray
    partitions: list[Partition]
    stats: list[GammaStats]
    n: int

    def __len__(self) -> int:
        return len(self.gammas)


@dataclass(frozen=True)
class Plateau:
    gamma_lo: float
    gamma_hi: float
    n_communities: int
    representative: Partition

    @property
    def width(self) -> float:
        return self.gamma_hi - self.gamma_lo


def sweep(net: CorrNetwork, grid: np.ndarray | None = None, heuristic: str = "greedy",
          seed: int = 0, null: str = "ng") -> ResolutionSweep:
    """Detect communities at every grid resolution with a shared seed.

    dH/dgamma is a forward difference over the grid (NaN at the last point)
    and vhat_prev compares each partition with the previous grid point's
    (NaN at the first).
    """
    gammas = default_gamma_grid() if grid is None else np.asarray(grid, dtype=float)
    if len(gammas) < 2 or np.any(np.diff(gammas) <= 0):
        raise ConfigError("gamma grid must be increasing with at least 2 points")
    parts = []
    energies = np.empty(len(gammas))
    for i, g in enumerate(gammas):
        model = EnergyModel.from_network(net, float(g), null=null)
        part = minimize(model, heuristic=heuristic, seed=seed)
        parts.append(part)
        energies[i] = part.energy
    stats = []
    for i, g in enumerate(gammas):
        dh = float((energies[i + 1] - energies[i]) / (gammas[i + 1] - gammas[i])) \
            if i + 1 < len(gammas) else float("nan")
        vhat = float(norm_vi(parts[i - 1], parts[i])) if i > 0 else float("nan")
        stats.append(GammaStats(float(g), parts[i].K, entropy(parts[i]),
                                modularity(net, parts[i]), float(energies[i]), dh, vhat))
    return ResolutionSweep(gammas, parts, stats, net.n)


def find_plateaus(sw: ResolutionSweep, min_width: float | None = None) -> list[Plateau]:
    """Maximal runs of exactly-equal partitions at least min_width wide.

    The default minimum width is three grid steps; single-point runs never
    qualify because their width is zero.
    """
    if min_width is None:
        min_width = 3.0 * float(sw.gammas[1] - sw.gammas[0])
    plateaus = []
    start = 0
    for i in range(1, len(sw.gammas) + 1):
        if i < len(sw.gammas) and sw.partitions[i].same_as(sw.partitions[start]):
            continue
        width = float(sw.gammas[i - 1] - sw.gammas[start])
        if i - start >= 2 and width >= min_width:
            plateaus.append(Plateau(float(sw.gammas[start]), float(sw.gammas[i - 1]),
                                    sw.partitions[start].K, sw.partitions[start]))
        start = i
    return plateaus


def main_plateau(plateaus: list[Plateau], n: int) -> Plateau | None:
    """Widest plateau with 2 < K < n; ties go to the lower-gamma one."""
    best = None
    for p in plateaus:
        if not (2 < p.n_communities < n):
            continue
        if best is None or p.width > best.width + 1e-12 or (
                abs(p.width - best.width) <= 1e-12 and p.gamma_lo < best.gamma_lo):
            best = p
    return best


def fixed_resolution(sweeps: list[ResolutionSweep], min_width: float | None = None) -> float:
    """Grid value covered by the most main plateaus; ties take the median.

    Sweeps without a main plateau are skipped; if none has one, there is no
    defensible working resolution and an error is raised.
    """
    if not sweeps:
        raise DataError("no sweeps given")
    grid = sweeps[0].gammas
    for sw in sweeps[1:]:
        if not np.array_equal(sw.gammas, grid):
            raise DataError("sweeps use different gamma grids")
    counts = np.zeros(len(grid), dtype=int)
    found = 0
    for sw in sweeps:
        main = main_plateau(find_plateaus(sw, min_width), sw.n)
        if main is None:
            continue
        found += 1
        counts += (grid >= main.gamma_lo - 1e-12) & (grid <= main.gamma_hi + 1e-12)
    if found == 0:
        raise AnalysisError("no sweep has a main plateau")
    tied = grid[counts == counts.max()]
    return float(tied[(len(tied) - 1) // 2])


def plateau_distance(plateau: Plateau, gamma: float) -> float:
    """0 inside the plateau, otherwise the gap to the nearer endpoint."""
    return max(0.0, plateau.gamma_lo - gamma, gamma - plateau.gamma_hi)


def write_sweep(path: str, sw: ResolutionSweep, window_start: int = 0,
                seed: int | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SWEEP_FORMAT}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        fh.write(f"# window_start={window_start}\n")
        w = csv.writer(fh)
        w.writerow(["gamma", "n_communities", "entropy", "modularity",
                    "energy", "dh_dgamma", "vhat_prev"])
        for s in sw.stats:
            w.writerow([repr(float(s.gamma)), s.n_communities, repr(float(s.entropy)),
                        repr(float(s.modularity_q)), repr(float(s.energy)),
                        repr(float(s.dh_dgamma)), repr(float(s.vhat_prev))])
