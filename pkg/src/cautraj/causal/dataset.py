"""Effect datasets: one row per lane-change case, complete-case per fit."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import InsufficientData, MissingColumn
from ..factors import OUTCOME, STAGE1_FACTORS, STAGE2_FACTORS
from .graph import CausalGraph, default_causal_graph


@dataclass
class EffectDataset:
    """Arrays for one treatment after complete-case filtering.

    ``W`` holds the adjustment covariates, ``X`` the conditioner column (or
    ``None`` for ATE-only datasets). ``index`` maps rows back to the source
    frame.
    """

    treatment: str
    T: np.ndarray
    Y: np.ndarray
    W: np.ndarray
    covariates: list[str]
    X: Optional[np.ndarray] = None
    conditioner: Optional[str] = None
    index: Optional[np.ndarray] = None

    @property
    def n(self):
        return self.T.shape[0]

    def with_treatment(self, T):
        return EffectDataset(self.treatment, np.asarray(T, dtype=float), self.Y, self.W,
                             self.covariates, self.X, self.conditioner, self.index)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, treatment: str, conditioner: Optional[str] = None,
                   covariates: Optional[Sequence[str]] = None, outcome: str = OUTCOME,
                   graph: Optional[CausalGraph] = None, drop_constant: bool = True):
        """Select columns and drop rows with absent values in any of them.

        Default covariates are every stage-1/stage-2 factor column present in
        ``frame`` except the treatment, the conditioner and the treatment's
        descendants in ``graph``. With ``drop_constant`` zero-variance
        covariates are removed after filtering.
        """
        for col in (treatment, outcome) + ((conditioner,) if conditioner else ()):
            if col not in frame.columns:
                raise MissingColumn(col)
        if covariates is None:
            graph = graph or default_causal_graph()
            blocked = {treatment, outcome, conditioner}
            if treatment in graph.nodes:
                blocked |= graph.descendants(treatment)
            covariates = [c for c in STAGE1_FACTORS + STAGE2_FACTORS
                          if c in frame.columns and c not in blocked]
        else:
            covariates = list(covariates)
            missing = [c for c in covariates if c not in frame.columns]
            if missing:
                raise MissingColumn(missing[0])
        used = [treatment, outcome] + ([conditioner] if conditioner else []) + covariates
        sub = frame[used].apply(pd.to_numeric, errors="coerce").dropna()
        if sub.empty:
            raise InsufficientData(f"no complete rows for treatment {treatment}")
        if drop_constant:
            covariates = [c for c in covariates if sub[c].nunique() > 1]
        W = sub[covariates].to_numpy(dtype=float) if covariates else np.empty((len(sub), 0))
        return cls(
            treatment=treatment,
            T=sub[treatment].to_numpy(dtype=float),
            Y=sub[outcome].to_numpy(dtype=float),
            W=W,
            covariates=covariates,
            X=sub[conditioner].to_numpy(dtype=float) if conditioner else None,
            conditioner=conditioner,
            index=sub.index.to_numpy(),
        )


def standardize(M, mean=None, std=None):
    """Column z-score; returns ``(Z, mean, std)``."""
    M = np.asarray(M, dtype=float)
    if mean is None:
        mean = M.mean(axis=0)
    if std is None:
        std = M.std(axis=0)
    safe = np.where(std > 0, std, 1.0)
    return (M - mean) / safe, mean, std
