"""Input checks shared by the learners and the estimator."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .netgraph import Network


def check_node_features(x, net: Network) -> np.ndarray:
    """Return ``x`` as a finite float ``(n, d)`` array with one row per node."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = check_array(x, dtype=float, ensure_min_samples=0)
    if x.shape[0] != net.n:
        raise ValueError(f"x has {x.shape[0]} rows, network has {net.n} nodes")
    return x


def check_nodes(nodes, net: Network) -> np.ndarray:
    """Validate a node subset; ``None`` means every node."""
    if nodes is None:
        return np.arange(net.n)
    nodes = np.asarray(nodes)
    if nodes.size == 0:
        return nodes.astype(np.int64).ravel()
    if nodes.dtype == bool:
        if nodes.shape != (net.n,):
            raise ValueError("boolean node mask must have length n")
        return np.flatnonzero(nodes)
    if not np.issubdtype(nodes.dtype, np.integer):
        raise ValueError("node ids must be integers")
    nodes = nodes.astype(np.int64).ravel()
    if nodes.min() < 0 or nodes.max() >= net.n:
        bad = nodes[(nodes < 0) | (nodes >= net.n)][0]
        raise ValueError(f"node {bad} outside graph with {net.n} nodes")
    return nodes


def check_node_vector(v, net: Network, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (net.n,):
        raise ValueError(f"{name} has length {v.size}, network has {net.n} nodes")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} contains non-finite values")
    return v
