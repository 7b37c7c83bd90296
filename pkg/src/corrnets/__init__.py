"""Correlation networks from return panels, and the communities that live in them.

The package covers the full chain: quote ingestion and return panels,
rolling correlation networks, Potts-energy community detection across
resolutions, partition comparison and event detection, node roles
(betweenness and eigenvector projections), spanning trees and dendrograms,
and permutation significance tests.
"""

__version__ = "0.1.0"

from . import centrality, compare, network, panel, potts, resolution, significance, synth, tree
from .errors import (
    AlignmentError,
    AnalysisError,
    ConfigError,
    CorrnetsError,
    DataError,
    DegenerateSeriesError,
    EmptyPanelError,
    NumericError,
)

__all__ = [
    "panel",
    "network",
    "potts",
    "resolution",
    "compare",
    "centrality",
    "tree",
    "significance",
    "synth",
    "CorrnetsError",
    "DataError",
    "AlignmentError",
    "EmptyPanelError",
    "DegenerateSeriesError",
    "ConfigError",
    "NumericError",
    "AnalysisError",
]
