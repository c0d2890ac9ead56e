"""Map stage-1 initial conditions to causal-prior MPC weights."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import pandas as pd

from ..errors import InsufficientData, ModelNotFitted
from ..factors import STAGE1_FACTORS
from .boosting import GradientBoostingRegressor
from .dataset import standardize

SVS = ("fo", "ft", "bt")
KINDS = ("alpha", "beta")
# CATE source per (kind, SV); position and speed weights share the speed CATE
DEFAULT_SOURCES = {(k, sv): f"{sv}_vx2" for k in KINDS for sv in SVS}
MIN_CASES = 100
EPS_FLOOR = 0.02
WEIGHT_BUDGET = 1.0


@dataclass
class CausalWeights:
    alpha: np.ndarray  # FO, FT, BT position weights
    beta: np.ndarray  # FO, FT, BT speed weights

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(3)
        self.beta = np.asarray(self.beta, dtype=float).reshape(3)
        if np.any(self.alpha < 0) or np.any(self.beta < 0):
            raise ValueError("causal weights must be nonnegative")

    @classmethod
    def zeros(cls):
        return cls(np.zeros(3), np.zeros(3))

    def to_dict(self):
        return {"alpha": self.alpha.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"], d["beta"])


def normalize_weights(raw, eps_floor=EPS_FLOOR, budget=WEIGHT_BUDGET):
    """Clamp at zero, add the floor, rescale to ``budget``."""
    w = np.maximum(np.asarray(raw, dtype=float), 0.0) + eps_floor
    return w * (budget / w.sum())


@dataclass
class WeightModel:
    features: list[str]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    models: dict  # (kind, sv) -> GradientBoostingRegressor
    sources: dict
    test_rmse: dict = field(default_factory=dict)
    eps_floor: float = EPS_FLOOR
    budget: float = WEIGHT_BUDGET

    def raw_predictions(self, stage1: Mapping[str, Optional[float]]):
        if not self.models:
            raise ModelNotFitted("weight model has no fitted regressors")
        missing = [f for f in self.features if stage1.get(f) is None or not np.isfinite(stage1[f])]
        if missing:
            raise ValueError(f"stage-1 vector lacks required factors: {missing}")
        x = np.array([[float(stage1[f]) for f in self.features]])
        z, _, _ = standardize(x, self.feature_mean, self.feature_std)
        return np.array([self.models[(k, sv)].predict(z)[0] for k in KINDS for sv in SVS])

    def predict(self, stage1) -> CausalWeights:
        w = normalize_weights(self.raw_predictions(stage1), self.eps_floor, self.budget)
        return CausalWeights(alpha=w[:3], beta=w[3:])

    def to_dict(self):
        return {
            "kind": "weight_model",
            "features": list(self.features),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "eps_floor": self.eps_floor,
            "budget": self.budget,
            "sources": {f"{k}:{sv}": src for (k, sv), src in self.sources.items()},
            "test_rmse": {f"{k}:{sv}": v for (k, sv), v in self.test_rmse.items()},
            "models": {f"{k}:{sv}": m.to_dict() for (k, sv), m in self.models.items()},
        }

    @classmethod
    def from_dict(cls, d):
        def key(s):
            k, sv = s.split(":")
            return (k, sv)
        return cls(
            features=list(d["features"]),
            feature_mean=np.asarray(d["feature_mean"], dtype=float),
            feature_std=np.asarray(d["feature_std"], dtype=float),
            models={key(s): GradientBoostingRegressor.from_dict(m) for s, m in d["models"].items()},
            sources={key(s): v for s, v in d["sources"].items()},
            test_rmse={key(s): float(v) for s, v in d["test_rmse"].items()},
            eps_floor=float(d["eps_floor"]),
            budget=float(d["budget"]),
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_weight_predictor(stage1: pd.DataFrame, cate: Mapping[str, pd.Series | np.ndarray],
                           sources=None, features=None, seed=0, test_fraction=0.25,
                           eps_floor=EPS_FLOOR, budget=WEIGHT_BUDGET, params=None) -> WeightModel:
    """Fit one boosted regressor per (weight kind, SV).

    ``stage1`` has one row per case; ``cate[treatment]`` is aligned with its
    rows (NaN where the case had no estimate). Regressors sharing a CATE
    source are fitted once and reused.
    """
    sources = dict(sources or DEFAULT_SOURCES)
    features = list(features or [f for f in STAGE1_FACTORS if f in stage1.columns])
    X_all = stage1[features].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
    params = dict({"n_estimators": 100, "max_depth": 3, "learning_rate": 0.1}, **(params or {}))

    complete = np.all(np.isfinite(X_all), axis=1)
    for src in set(sources.values()):
        if src not in cate:
            raise InsufficientData(f"no CATE estimates for {src}")
        complete &= np.isfinite(np.asarray(cate[src], dtype=float))
    n = int(complete.sum())
    if n < MIN_CASES:
        raise InsufficientData(f"weight predictor needs {MIN_CASES} complete cases, got {n}")
    X = X_all[complete]
    z, mean, std = standardize(X)

    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    test, train = np.sort(order[:n_test]), np.sort(order[n_test:])

    fitted, rmse = {}, {}
    for src in sorted(set(sources.values())):
        y = np.asarray(cate[src], dtype=float)[complete]
        model = GradientBoostingRegressor(random_state=seed, **params).fit(z[train], y[train])
        err = model.predict(z[test]) - y[test]
        fitted[src] = (model, float(np.sqrt(np.mean(err * err))) if n_test else float("nan"))
    models = {key: fitted[src][0] for key, src in sources.items()}
    rmse = {key: fitted[src][1] for key, src in sources.items()}
    return WeightModel(features, mean, std, models, sources, rmse, eps_floor, budget)


def predict_weights(model: WeightModel, stage1) -> CausalWeights:
    return model.predict(stage1)
