"""Synthetic panels and networks with planted structure.

The factor model gives group g's members a common driver with loading
lambda, so the expected within-group correlation is lambda squared (single
level); an optional top-level factor correlates all groups.  Planted
networks skip returns entirely and draw edge weights directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .network import CorrNetwork
from .panel import ReturnPanel


@dataclass(frozen=True)
class FactorModelSpec:
    """Groups as (member_count, loading) pairs on a common time axis.

    Loadings must satisfy lambda^2 + hierarchy^2 <= 1 so the idiosyncratic
    weight sqrt(1 - lambda^2 - hierarchy^2) stays real; ``noise`` scales the
    idiosyncratic part only.
    """

    groups: tuple[tuple[int, float], ...]
    length: int
    noise: float = 1.0
    hierarchy: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.length < 2:
            raise ConfigError("need at least 2 steps")
        if not self.groups or any(c < 1 for c, _ in self.groups):
            raise ConfigError("every group needs at least one member")
        for _, lam in self.groups:
            if lam * lam + self.hierarchy * self.hierarchy > 1.0 + 1e-12:
                raise ConfigError("loading^2 + hierarchy^2 must not exceed 1")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")


def generate_panel(spec: FactorModelSpec, quote: str = "NUM",
                   expand: bool = False) -> ReturnPanel:
    """Gaussian factor panel; instruments are named G<g>X<m>/<quote>.

    Group labels recoverable from the instrument names make planted-versus-
    detected comparisons straightforward in tests.
    """
    rng = np.random.default_rng(spec.seed)
    top = rng.standard_normal(spec.length)
    names, rows = [], []
    for g, (count, lam) in enumerate(spec.groups):
        factor = rng.standard_normal(spec.length)
        idio_w = spec.noise * np.sqrt(max(1.0 - lam * lam - spec.hierarchy ** 2, 0.0))
        for k in range(count):
            eps = rng.standard_normal(spec.length)
            names.append(f"G{g}X{k}/{quote}")
            rows.append(lam * factor + spec.hierarchy * top + idio_w * eps)
    panel = ReturnPanel(names, np.arange(spec.length, dtype=float), np.vstack(rows), 0)
    if expand:
        from .panel import expand_inverses

        panel = expand_inverses(panel)
    return panel


def planted_groups(sizes: list[int]) -> np.ndarray:
    """Membership labels 0, 0, ..., 1, 1, ... matching generate order."""
    return np.repeat(np.arange(len(sizes)), sizes)


def generate_planted_network(groups: list[int], p_in: float, p_out: float,
                             seed: int = 0, jitter: float = 0.0) -> CorrNetwork:
    """Weighted network with within-group weight p_in and p_out elsewhere.

    Optional symmetric uniform jitter is clipped back into [0, 1]; the
    diagonal is zero and labels follow the G<g>X<k>/NUM convention.
    """
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ConfigError("need 0 <= p_out <= p_in <= 1")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(groups)), groups)
    n = len(labels)
    A = np.where(labels[:, None] == labels[None, :], p_in, p_out).astype(float)
    if jitter > 0.0:
        noise = rng.uniform(-jitter, jitter, size=(n, n))
        A = np.clip(A + np.triu(noise, 1) + np.triu(noise, 1).T, 0.0, 1.0)
    np.fill_diagonal(A, 0.0)
    names = [f"G{g}X{k}/NUM" for g, size in enumerate(groups) for k in range(size)]
    return CorrNetwork(names, A, 0, 0, include_self_edges=False)
