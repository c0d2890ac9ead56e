"""Average treatment effect via the generalized propensity score.

The treatment is modelled as ``T | W ~ N(a0 + W a1, s2)`` (OLS is the
Gaussian MLE). The outcome regression combines the W adjustment with the
propensity terms: ``Y ~ 1, T, T^2, R, R^2, T*R, W``. The reported ATE is the
sample mean of the fitted marginal effect ``b1 + 2 b2 T_i + b5 R_i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InsufficientData, RankDeficient, ZeroResidualVariance
from .dataset import EffectDataset, standardize

# n must exceed dim(W) by this margin
GPS_MIN_MARGIN = 10


@dataclass
class GpsModel:
    alpha0: float
    alpha1: np.ndarray
    sigma2: float
    degenerate: bool = False  # sigma2 == 0: treatment is an exact function of W

    def mean(self, W):
        return self.alpha0 + np.asarray(W, dtype=float) @ self.alpha1

    def density(self, T, W):
        if self.degenerate:
            raise ZeroResidualVariance("treatment is a deterministic function of the covariates")
        r = np.asarray(T, dtype=float) - self.mean(W)
        return np.exp(-0.5 * r * r / self.sigma2) / math.sqrt(2.0 * math.pi * self.sigma2)

    def to_dict(self):
        return {"alpha0": self.alpha0, "alpha1": self.alpha1.tolist(), "sigma2": self.sigma2,
                "degenerate": self.degenerate}


@dataclass
class AteEstimate:
    treatment: str
    ate: float
    beta: np.ndarray  # b0..b5
    beta_w: np.ndarray
    gps: GpsModel
    n: int
    covariates: list[str] = field(default_factory=list)

    def to_dict(self):
        return {
            "treatment": self.treatment,
            "ate": self.ate,
            "beta": self.beta.tolist(),
            "beta_w": self.beta_w.tolist(),
            "covariates": list(self.covariates),
            "gps": self.gps.to_dict(),
            "n": self.n,
        }


def _lstsq(D, target):
    rank = np.linalg.matrix_rank(D)
    if rank < D.shape[1]:
        raise RankDeficient(f"design matrix has rank {rank} < {D.shape[1]} columns")
    coef, *_ = np.linalg.lstsq(D, target, rcond=None)
    return coef


def fit_gps(T, W, min_margin=GPS_MIN_MARGIN) -> GpsModel:
    """Gaussian treatment model by OLS; ``sigma2`` uses divisor n (MLE)."""
    T = np.asarray(T, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    n, p = W.shape
    if n <= p + min_margin:
        raise InsufficientData(f"GPS fit needs n > {p + min_margin}, got {n}")
    D = np.column_stack([np.ones(n), W])
    coef = _lstsq(D, T)
    resid = T - D @ coef
    sigma2 = float(np.mean(resid * resid))
    scale = max(float(np.mean(T * T)), 1e-300)
    degenerate = sigma2 <= 1e-24 * scale
    return GpsModel(alpha0=float(coef[0]), alpha1=coef[1:], sigma2=sigma2, degenerate=degenerate)


def estimate_ate(data: EffectDataset) -> AteEstimate:
    T, Y = data.T, data.Y
    Wz, _, _ = standardize(data.W)
    gps = fit_gps(T, Wz)
    R = gps.density(T, Wz)
    n = T.shape[0]
    D = np.column_stack([np.ones(n), T, T * T, R, R * R, T * R, Wz])
    coef = _lstsq(D, Y)
    beta, beta_w = coef[:6], coef[6:]
    ate = float(np.mean(beta[1] + 2.0 * beta[2] * T + beta[5] * R))
    return AteEstimate(data.treatment, ate, beta, beta_w, gps, n, list(data.covariates))
