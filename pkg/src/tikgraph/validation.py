"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np

from .datasets import GraphSample
from .graph import Graph


def check_samples(samples, name: str = "samples") -> list:
    """Validate a list of GraphSample-like objects; returns it as a list."""
    samples = list(samples)
    if not samples:
        raise ValueError(f"{name} must be a nonempty list of graph samples")
    d = None
    for idx, s in enumerate(samples):
        if not isinstance(s, GraphSample):
            raise TypeError(f"{name}[{idx}] is {type(s).__name__}, expected GraphSample")
        feats = np.asarray(s.features)
        if feats.ndim != 2 or feats.shape[0] != s.graph.n:
            raise ValueError(
                f"{name}[{idx}]: features shape {feats.shape} does not match n={s.graph.n}"
            )
        if d is None:
            d = feats.shape[1]
        elif feats.shape[1] != d:
            raise ValueError(f"{name}[{idx}]: inconsistent feature dimension")
    return samples


def check_graph(g) -> Graph:
    if not isinstance(g, Graph):
        raise TypeError(f"expected Graph, got {type(g).__name__}")
    return g
