"""Conditional average treatment effects by cross-fitted double ML.

Outcome and treatment nuisances are boosted trees on ``[X, W]``. The final
stage is the kernel-localised residual-on-residual regression

    theta(x) = sum_i K_x(X_i) Yres_i Tres_i / sum_i K_x(X_i) Tres_i^2

which is the closed-form minimiser of the weighted squared orthogonal
moment. ``K_x`` is a Gaussian kernel on the standardised conditioner with
Silverman's bandwidth.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels
from ..errors import InsufficientData, MissingColumn, ZeroResidualVariance
from .boosting import GradientBoostingRegressor
from .dataset import EffectDataset, standardize

CATE_MIN_ROWS = 100
NUISANCE_PARAMS = {"n_estimators": 100, "max_depth": 3, "learning_rate": 0.1}


def silverman_bandwidth(z):
    return 1.06 * float(np.std(z)) * z.shape[0] ** (-0.2)


@dataclass
class CateResult:
    treatment: str
    conditioner: str
    effects: np.ndarray
    x: np.ndarray
    y_res: np.ndarray
    t_res: np.ndarray
    bandwidth: float
    x_mean: float
    x_std: float
    index: Optional[np.ndarray] = None

    @property
    def mean(self):
        return float(np.mean(self.effects))

    def effect_at(self, x_values):
        """CATE at new raw conditioner values using the stored residuals."""
        z = (np.asarray(x_values, dtype=float) - self.x_mean) / self.x_std
        zs = (self.x - self.x_mean) / self.x_std
        return kernels.local_theta(np.atleast_1d(z), zs, self.y_res, self.t_res, self.bandwidth)

    def to_dict(self):
        return {
            "treatment": self.treatment,
            "conditioner": self.conditioner,
            "mean": self.mean,
            "std": float(np.std(self.effects)),
            "bandwidth": self.bandwidth,
            "n": int(self.effects.shape[0]),
            "effects": self.effects.tolist(),
            "index": None if self.index is None else [int(i) for i in self.index],
        }


def cross_fit_residuals(Y, T, features, seed, n_folds=2, params=None):
    """Out-of-fold residuals ``(Y - mu_hat, T - f_hat)``."""
    n = Y.shape[0]
    params = dict(NUISANCE_PARAMS, **(params or {}))
    order = np.random.default_rng(seed).permutation(n)
    y_res = np.empty(n)
    t_res = np.empty(n)
    for fold in np.array_split(order, n_folds):
        train = np.setdiff1d(order, fold, assume_unique=True)
        train.sort()
        fold = np.sort(fold)
        mu = GradientBoostingRegressor(**params).fit(features[train], Y[train])
        f = GradientBoostingRegressor(**params).fit(features[train], T[train])
        y_res[fold] = Y[fold] - mu.predict(features[fold])
        t_res[fold] = T[fold] - f.predict(features[fold])
    return y_res, t_res


def estimate_cate(data: EffectDataset, conditioner: Optional[str] = None, seed: int = 0,
                  n_folds: int = 2, nuisance_params=None) -> CateResult:
    if data.X is None:
        raise MissingColumn(conditioner or "conditioner")
    if conditioner is not None and data.conditioner is not None and conditioner != data.conditioner:
        raise ValueError(f"dataset was built for conditioner {data.conditioner!r}")
    n = data.n
    if n < CATE_MIN_ROWS:
        raise InsufficientData(f"CATE needs at least {CATE_MIN_ROWS} rows, got {n}")
    x_mean, x_std = float(np.mean(data.X)), float(np.std(data.X))
    if x_std == 0.0:
        raise InsufficientData(f"conditioner {data.conditioner} is constant")
    z = (data.X - x_mean) / x_std
    Wz, _, _ = standardize(data.W)
    features = np.column_stack([z, Wz])
    y_res, t_res = cross_fit_residuals(data.Y, data.T, features, seed, n_folds, nuisance_params)
    t_var = float(np.sum((data.T - data.T.mean()) ** 2))
    if float(np.sum(t_res * t_res)) <= 1e-10 * max(t_var, 1e-300):
        raise ZeroResidualVariance(f"{data.treatment} is fully explained by the covariates")
    h = silverman_bandwidth(z)
    effects = kernels.local_theta(z, z, y_res, t_res, h)
    return CateResult(
        treatment=data.treatment,
        conditioner=data.conditioner,
        effects=effects,
        x=np.asarray(data.X, dtype=float),
        y_res=y_res,
        t_res=t_res,
        bandwidth=h,
        x_mean=x_mean,
        x_std=x_std,
        index=data.index,
    )
