"""Direct and peer treatment effects on a single network.

Cross-fitted orthogonal-score estimation of a direct effect ``theta`` and a
neighbour-sum peer effect ``alpha`` from one graph, using a focal set of
nodes with disjoint closed neighbourhoods as independent units.
"""

from .dgp import Dataset, DgpConfig, oracle_nuisance, simulate
from .estimator import (DegenerateScore, EffectEstimate, NetworkDML, cross_fit_estimate,
                        fold_score_solve, orthogonality_check, variance_estimate)
from .focal import FocalSet, FoldPlan, greedy_focal_set, kfold_partition
from .netgraph import Network, SbmConfig, build_network, neighbor_sum, sbm_generate
from .nuisance import GinConfig, GINClassifier, GINRegressor, PAClassifier, PARegressor

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DegenerateScore", "DgpConfig", "EffectEstimate", "FocalSet", "FoldPlan",
    "GINClassifier", "GINRegressor", "GinConfig", "Network", "NetworkDML", "PAClassifier",
    "PARegressor", "SbmConfig", "build_network", "cross_fit_estimate", "fold_score_solve",
    "greedy_focal_set", "kfold_partition", "neighbor_sum", "oracle_nuisance",
    "orthogonality_check", "sbm_generate", "simulate", "variance_estimate",
]
