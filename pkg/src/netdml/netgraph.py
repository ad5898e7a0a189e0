"""Immutable undirected networks, SBM generation and edge-list I/O."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class GraphFormatError(ValueError):
    """Raised for malformed edge lists or invalid graph input."""


@dataclass(frozen=True)
class Network:
    """Binary symmetric adjacency in CSR form over node ids ``0..n-1``.

    Construct through :func:`build_network` or :func:`sbm_generate`; the
    constructor assumes its input already satisfies the invariants.
    """

    adjacency: sp.csr_matrix

    def __post_init__(self):
        a = self.adjacency
        for arr in (a.data, a.indices, a.indptr):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` array with ``i < j``, sorted."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        e = np.column_stack([coo.row, coo.col]).astype(np.int64)
        return e[np.lexsort((e[:, 1], e[:, 0]))]

    def permute(self, perm: np.ndarray) -> Network:
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        e = self.edges()
        return build_network(perm[e] if len(e) else e, n_nodes=self.n)

    def __repr__(self):
        return f"Network(n={self.n}, edges={self.n_edges})"


def build_network(edges: Iterable[Sequence[int]], n_nodes: int | None = None) -> Network:
    """Build a symmetric, deduplicated network from an edge list.

    Duplicates and both orientations of an edge are merged. ``n_nodes``
    defaults to ``max id + 1``; pass it to keep trailing isolated nodes.
    """
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if e.size == 0:
        e = e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphFormatError("edge list must be a sequence of (i, j) pairs")
    if (e < 0).any():
        raise GraphFormatError("node ids must be non-negative")
    loops = e[:, 0] == e[:, 1]
    if loops.any():
        raise GraphFormatError(f"self-loop at node {int(e[loops][0, 0])}")
    n_min = int(e.max()) + 1 if len(e) else 0
    n = n_min if n_nodes is None else int(n_nodes)
    if n < n_min:
        raise GraphFormatError(f"n_nodes={n} but edge list references node {n_min - 1}")
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.data[:] = 1.0
    a.sort_indices()
    return Network(a)


@dataclass(frozen=True)
class SbmConfig:
    n_nodes: int
    n_blocks: int
    p_intra: float
    p_inter: float
    seed: int = 0

    def __post_init__(self):
        if self.n_nodes < 1 or self.n_blocks < 1:
            raise ValueError("n_nodes and n_blocks must be positive")
        if self.n_blocks > self.n_nodes:
            raise ValueError("n_blocks cannot exceed n_nodes")
        for name in ("p_intra", "p_inter"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")


def block_labels(n_nodes: int, n_blocks: int) -> np.ndarray:
    """Contiguous near-equal blocks (sizes floor(n/b) or ceil(n/b))."""
    bounds = np.linspace(0, n_nodes, n_blocks + 1).round().astype(np.int64)
    return np.repeat(np.arange(n_blocks), np.diff(bounds))


def sbm_generate(cfg: SbmConfig) -> Network:
    """Sample an undirected stochastic block model graph.

    Every pair ``i < j`` is an independent Bernoulli draw with ``p_intra``
    inside a block and ``p_inter`` across blocks. Pairs are visited row by
    row so memory stays linear in ``n``.
    """
    rng = np.random.default_rng(cfg.seed)
    labels = block_labels(cfg.n_nodes, cfg.n_blocks)
    n = cfg.n_nodes
    rows, cols = [], []
    for i in range(n - 1):
        j = np.arange(i + 1, n)
        p = np.where(labels[j] == labels[i], cfg.p_intra, cfg.p_inter)
        hit = j[rng.random(n - i - 1) < p]
        if hit.size:
            rows.append(np.full(hit.size, i))
            cols.append(hit)
    if rows:
        e = np.column_stack([np.concatenate(rows), np.concatenate(cols)])
    else:
        e = np.empty((0, 2), dtype=np.int64)
    return build_network(e, n_nodes=n)


def neighbor_sum(net: Network, v: np.ndarray) -> np.ndarray:
    """Return ``A @ v``: for each node, the sum of ``v`` over its neighbours.

    ``v`` may be a vector or an ``(n, d)`` matrix.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != net.n:
        raise ValueError(f"vector has length {v.shape[0]}, network has {net.n} nodes")
    return net.adjacency @ v


def _parse_edge_lines(lines: Iterable[str]) -> list[tuple[str, str]]:
    pairs = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"line {lineno}: expected two node labels, got {len(parts)}")
        pairs.append((parts[0], parts[1]))
    return pairs


def read_edge_list(path, labels: Sequence[str] | None = None) -> tuple[Network, list[str]]:
    """Read a whitespace-separated edge list.

    Returns the network and ``labels`` with ``labels[id]`` the original label.
    When ``labels`` is given (e.g. the ``id`` column of a node file) it fixes
    the id order and node count; unknown labels raise
    :class:`GraphFormatError`. Otherwise non-negative integer labels are
    sorted numerically and anything else keeps first-appearance order.
    """
    with open(path, encoding="utf-8") as fh:
        pairs = _parse_edge_lines(fh)
    if labels is None:
        seen = list(dict.fromkeys(lbl for pair in pairs for lbl in pair))
        if all(s.isdigit() for s in seen):
            seen.sort(key=int)
        labels = seen
    labels = [str(lbl) for lbl in labels]
    index = {lbl: i for i, lbl in enumerate(labels)}
    if len(index) != len(labels):
        raise GraphFormatError("duplicate node labels")
    try:
        e = [(index[a], index[b]) for a, b in pairs]
    except KeyError as exc:
        raise GraphFormatError(f"edge references unknown node {exc.args[0]!r}") from None
    return build_network(e, n_nodes=len(labels)), labels


def write_edge_list(net: Network, path, labels: Sequence[str] | None = None) -> None:
    e = net.edges()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# undirected edge list: {net.n} nodes, {net.n_edges} edges\n")
        for i, j in e:
            a, b = (labels[i], labels[j]) if labels is not None else (i, j)
            fh.write(f"{a} {b}\n")


def write_remap(labels: Sequence[str], path) -> None:
    """Write the ``label,id`` mapping produced by :func:`read_edge_list`."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "id"])
        for i, lbl in enumerate(labels):
            w.writerow([lbl, i])


__all__ = [
    "GraphFormatError", "Network", "SbmConfig", "block_labels", "build_network",
    "neighbor_sum", "read_edge_list", "sbm_generate", "write_edge_list", "write_remap",
]
