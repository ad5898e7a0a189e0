from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROPENSITY_CLIP = 1e-6


@dataclass(frozen=True)
class NuisancePredictions:
    """Node-indexed ``m_hat`` and ``l_hat``; entries outside ``covered`` are NaN."""

    m_hat: np.ndarray
    l_hat: np.ndarray
    covered: np.ndarray

    @classmethod
    def full(cls, m_hat, l_hat) -> NuisancePredictions:
        m_hat = np.asarray(m_hat, dtype=float)
        return cls(m_hat, np.asarray(l_hat, dtype=float), np.arange(len(m_hat)))

    @classmethod
    def on_nodes(cls, n: int, nodes, m_vals, l_vals) -> NuisancePredictions:
        nodes = np.asarray(nodes, dtype=np.int64)
        m = np.full(n, np.nan)
        ell = np.full(n, np.nan)
        m[nodes] = m_vals
        ell[nodes] = l_vals
        return cls(m, ell, np.unique(nodes))

    def restrict(self, nodes) -> NuisancePredictions:
        nodes = np.asarray(nodes, dtype=np.int64)
        return NuisancePredictions.on_nodes(len(self.m_hat), nodes,
                                            self.m_hat[nodes], self.l_hat[nodes])

    def covers(self, nodes) -> bool:
        return bool(np.isin(np.asarray(nodes), self.covered).all())


def clip_propensity(p):
    return np.clip(p, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)


def is_binary(values) -> bool:
    return bool(np.isin(np.asarray(values, dtype=float), (0.0, 1.0)).all())
