"""Focal sets of mutually independent units and their cross-fitting folds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .netgraph import Network


@dataclass(frozen=True)
class FocalSet:
    """Nodes whose closed neighbourhoods are pairwise disjoint.

    ``members`` keeps the order in which the greedy pass accepted them.
    """

    members: np.ndarray

    @property
    def n_f(self) -> int:
        return len(self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members.tolist())


def _closed(net: Network, v: int) -> np.ndarray:
    return np.append(net.neighbors(v), v)


def greedy_focal_set(net: Network, seed=0) -> FocalSet:
    """Greedy maximal 2-packing.

    Nodes are visited in ascending degree with a seeded shuffle breaking
    ties; a node is accepted when its closed neighbourhood touches no
    accepted closed neighbourhood. Any two members end up at graph distance
    at least 3.
    """
    if net.n == 0:
        raise ValueError("network has no nodes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(net.n)
    order = perm[np.argsort(net.degrees[perm], kind="stable")]
    covered = np.zeros(net.n, dtype=bool)
    accepted = []
    for v in order:
        cl = _closed(net, v)
        if not covered[cl].any():
            covered[cl] = True
            accepted.append(v)
    # maximality sweep: a single pass is already maximal, this guards edits above
    for v in range(net.n):
        if not covered[_closed(net, v)].any():
            covered[_closed(net, v)] = True
            accepted.append(v)
    return FocalSet(np.asarray(accepted, dtype=np.int64))


def is_focal_set(net: Network, members, maximal: bool = True) -> bool:
    """Check pairwise closed-neighbourhood disjointness (and maximality)."""
    covered = np.zeros(net.n, dtype=np.int64)
    for v in members:
        covered[_closed(net, int(v))] += 1
    if (covered > 1).any():
        return False
    if maximal:
        return all(covered[_closed(net, v)].any() for v in range(net.n))
    return True


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of focal members to ``k`` folds.

    ``nodes[i]`` belongs to fold ``fold_of[i]``.
    """

    k: int
    nodes: np.ndarray
    fold_of: np.ndarray
    seed: object = None

    @property
    def assignment(self) -> dict[int, int]:
        return dict(zip(self.nodes.tolist(), self.fold_of.tolist()))

    def test_nodes(self, fold: int) -> np.ndarray:
        return np.sort(self.nodes[self.fold_of == fold])

    def train_nodes(self, fold: int) -> np.ndarray:
        return np.sort(self.nodes[self.fold_of != fold])

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of, minlength=self.k)


def kfold_partition(fs: FocalSet, k: int, seed=0) -> FoldPlan:
    """Shuffle focal members with ``seed`` and deal them round-robin into ``k`` folds."""
    if k < 2:
        raise ValueError(f"need at least 2 folds, got k={k}")
    if k > fs.n_f:
        raise ValueError(f"k={k} folds exceeds focal set size n_f={fs.n_f}")
    rng = np.random.default_rng(seed)
    nodes = fs.members[rng.permutation(fs.n_f)]
    return FoldPlan(k=k, nodes=nodes, fold_of=np.arange(fs.n_f) % k, seed=seed)


def write_focal_set(fs: FocalSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{v}\n" for v in fs.members)


__all__ = ["FocalSet", "FoldPlan", "greedy_focal_set", "is_focal_set", "kfold_partition",
           "write_focal_set"]
