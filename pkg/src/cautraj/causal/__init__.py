"""Causal effect estimation: expert graph, GPS-based ATE, DML-based CATE."""
from .boosting import GradientBoostingRegressor, fit_boosted_trees
from .dataset import EffectDataset
from .dml import CateResult, estimate_cate
from .gps import AteEstimate, GpsModel, estimate_ate, fit_gps
from .graph import CausalGraph, default_causal_graph
from .placebo import PlaceboReport, placebo_test
from .weights import (CausalWeights, WeightModel, normalize_weights, predict_weights,
                      train_weight_predictor)

__all__ = [
    "AteEstimate", "CateResult", "CausalGraph", "CausalWeights", "EffectDataset",
    "GpsModel", "GradientBoostingRegressor", "PlaceboReport", "WeightModel",
    "default_causal_graph", "estimate_ate", "estimate_cate", "fit_boosted_trees", "fit_gps",
    "normalize_weights", "placebo_test", "predict_weights", "train_weight_predictor",
]
