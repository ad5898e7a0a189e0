"""Paired learners for ``m(X, A) = E[T | X, A]`` and ``l(X, A) = E[Y | X, A]``."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..dgp import Dataset, DgpConfig, oracle_nuisance
from ..netgraph import Network
from ..validation import check_nodes
from .base import NuisancePredictions, is_binary
from .gin import GinConfig, fit_gin
from .pa import fit_pa

LEARNERS = ("gin", "pa", "oracle")


@dataclass
class FittedNuisance:
    """A trained treatment model and outcome model.

    ``treatment_model`` and ``outcome_model`` expose
    ``predict(net, x, nodes)``.
    """

    treatment_model: object
    outcome_model: object

    def predict(self, net: Network, x, nodes) -> NuisancePredictions:
        nodes = np.unique(check_nodes(nodes, net))
        if nodes.size == 0:
            return NuisancePredictions(np.full(net.n, np.nan), np.full(net.n, np.nan),
                                       np.empty(0, dtype=np.int64))
        return NuisancePredictions.on_nodes(
            net.n, nodes,
            self.treatment_model.predict(net, x, nodes),
            self.outcome_model.predict(net, x, nodes))


class GinNuisance:
    """GIN propensity (or treatment regression, for continuous T) and outcome models."""

    def __init__(self, config: GinConfig | None = None):
        self.config = config or GinConfig()

    def fit(self, net: Network, data: Dataset, train_nodes) -> FittedNuisance:
        seed = self.config.seed
        t_kind = "propensity" if is_binary(data.t[train_nodes]) else "outcome"
        m = fit_gin(replace(self.config, seed=[seed, 0]), net, data.x, data.t, t_kind, train_nodes)
        ell = fit_gin(replace(self.config, seed=[seed, 1]), net, data.x, data.y, "outcome",
                      train_nodes)
        return FittedNuisance(m, ell)


class PANuisance:
    """Linear/logistic models on predefined neighbour aggregates."""

    def __init__(self, ridge: float = 1e-6):
        self.ridge = ridge

    def fit(self, net: Network, data: Dataset, train_nodes) -> FittedNuisance:
        t_kind = "propensity" if is_binary(data.t[train_nodes]) else "outcome"
        return FittedNuisance(fit_pa(net, data.x, data.t, t_kind, train_nodes, self.ridge),
                              fit_pa(net, data.x, data.y, "outcome", train_nodes, self.ridge))


class _OracleModel:
    def __init__(self, cfg: DgpConfig, which: str):
        self.cfg = cfg
        self.which = which

    def predict(self, net, x, nodes):
        pred = oracle_nuisance(self.cfg, net, x)
        return (pred.m_hat if self.which == "m" else pred.l_hat)[nodes]


class OracleNuisance:
    """Known nuisance functions of a :class:`DgpConfig`; training data is ignored."""

    def __init__(self, dgp_config: DgpConfig):
        self.dgp_config = dgp_config

    def fit(self, net: Network, data: Dataset, train_nodes) -> FittedNuisance:
        return FittedNuisance(_OracleModel(self.dgp_config, "m"),
                              _OracleModel(self.dgp_config, "l"))


def make_learner(name: str, gin_config: GinConfig | None = None,
                 dgp_config: DgpConfig | None = None, ridge: float = 1e-6):
    if name == "gin":
        return GinNuisance(gin_config)
    if name == "pa":
        return PANuisance(ridge)
    if name == "oracle":
        if dgp_config is None:
            raise ValueError("the oracle learner needs the generating DgpConfig")
        return OracleNuisance(dgp_config)
    raise ValueError(f"unknown learner {name!r}; choose from {LEARNERS}")


def predict(model: FittedNuisance, net: Network, x, nodes) -> NuisancePredictions:
    """Evaluation-mode nuisance predictions on ``nodes``."""
    return model.predict(net, x, nodes)
