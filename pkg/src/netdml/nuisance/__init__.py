from .base import NuisancePredictions
from .gin import (GinConfig, GinModel, GinParams, GINClassifier, GINRegressor, fit_gin,
                  gin_aggregate, gin_forward, gin_loss_grad, init_params)
from .learners import (LEARNERS, FittedNuisance, GinNuisance, OracleNuisance, PANuisance,
                       make_learner, predict)
from .pa import PAClassifier, PAModel, PARegressor, fit_pa, pa_features

__all__ = [
    "FittedNuisance", "GINClassifier", "GINRegressor", "GinConfig", "GinModel", "GinNuisance",
    "GinParams", "LEARNERS", "NuisancePredictions", "OracleNuisance", "PAClassifier", "PAModel",
    "PANuisance", "PARegressor", "fit_gin", "fit_pa", "gin_aggregate", "gin_forward",
    "gin_loss_grad", "init_params", "make_learner", "pa_features", "predict",
]
