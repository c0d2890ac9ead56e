"""Pairwise interaction strength from overlapping vehicle potential fields.

Each vehicle carries an anisotropic Gaussian energy field whose
longitudinal spread grows with speed. Its influence region is the
``region_cut``-sigma rectangle around the centre. For a pair,

    IS = ROL * (RE_i + RE_j) / 2

where ROL is the overlap area over the smaller region's area and RE_k is
the share of vehicle k's regional energy that falls inside the overlap.
Regional energies use closed-form erf integrals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.special import erf

from .config import as_float
from .errors import DegenerateRect, StageWindowEmpty

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class FieldParams:
    peak_energy: float = 1.0
    sigma_x0: float = 8.0
    sigma_y0: float = 1.5
    speed_gain: float = 0.3
    region_cut: float = 3.0

    def __post_init__(self):
        for name in ("peak_energy", "sigma_x0", "sigma_y0", "region_cut"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.speed_gain < 0:
            raise ValueError("speed_gain must be nonnegative")
        if self.region_cut < 1:
            raise ValueError("region_cut must be at least 1")

    def sigmas(self, vx):
        return self.sigma_x0 + self.speed_gain * np.abs(vx), self.sigma_y0

    @classmethod
    def from_config(cls, cfg: Mapping[str, str]):
        d = cls()
        return cls(
            peak_energy=as_float(cfg, "peak_energy", d.peak_energy),
            sigma_x0=as_float(cfg, "sigma_x0", d.sigma_x0),
            sigma_y0=as_float(cfg, "sigma_y0", d.sigma_y0),
            speed_gain=as_float(cfg, "speed_gain", d.speed_gain),
            region_cut=as_float(cfg, "region_cut", d.region_cut),
        )

    def to_dict(self):
        return {"peak_energy": self.peak_energy, "sigma_x0": self.sigma_x0,
                "sigma_y0": self.sigma_y0, "speed_gain": self.speed_gain,
                "region_cut": self.region_cut}


@dataclass(frozen=True)
class FieldState:
    """Minimal kinematics the field depends on: centre and longitudinal speed."""
    x: float
    y: float
    vx: float = 0.0


@dataclass(frozen=True)
class InfluenceRect:
    x1: float
    x2: float
    y1: float
    y2: float

    @property
    def area(self):
        return max(0.0, self.x2 - self.x1) * max(0.0, self.y2 - self.y1)

    def intersect(self, other: "InfluenceRect") -> "InfluenceRect":
        return InfluenceRect(max(self.x1, other.x1), min(self.x2, other.x2),
                             max(self.y1, other.y1), min(self.y2, other.y2))


@dataclass(frozen=True)
class InteractionResult:
    rol: float
    re_i: float
    re_j: float
    strength: float


def field_value(state: FieldState, x, y, params: FieldParams = FieldParams()):
    sx, sy = params.sigmas(state.vx)
    dx = (np.asarray(x, dtype=float) - state.x) / sx
    dy = (np.asarray(y, dtype=float) - state.y) / sy
    return params.peak_energy * np.exp(-0.5 * (dx * dx + dy * dy))


def influence_region(state: FieldState, params: FieldParams = FieldParams()) -> InfluenceRect:
    sx, sy = params.sigmas(state.vx)
    hx, hy = params.region_cut * sx, params.region_cut * sy
    return InfluenceRect(state.x - hx, state.x + hx, state.y - hy, state.y + hy)


def overlap_ratio(rect_i: InfluenceRect, rect_j: InfluenceRect) -> float:
    a_i, a_j = rect_i.area, rect_j.area
    if a_i <= 0 or a_j <= 0:
        raise DegenerateRect("influence rectangle has zero area")
    return min(1.0, rect_i.intersect(rect_j).area / min(a_i, a_j))


def _gauss_mass(lo, hi, c, s):
    """Integral of exp(-(u-c)^2 / 2s^2) over [lo, hi], up to the constant s*sqrt(pi/2)."""
    return erf((hi - c) / (_SQRT2 * s)) - erf((lo - c) / (_SQRT2 * s))


def energy_ratio(state: FieldState, overlap: InfluenceRect, params: FieldParams = FieldParams()) -> float:
    """Share of the vehicle's regional field energy inside ``overlap``."""
    if overlap.x2 <= overlap.x1 or overlap.y2 <= overlap.y1:
        return 0.0
    sx, sy = params.sigmas(state.vx)
    region = influence_region(state, params)
    num = (_gauss_mass(overlap.x1, overlap.x2, state.x, sx)
           * _gauss_mass(overlap.y1, overlap.y2, state.y, sy))
    den = (_gauss_mass(region.x1, region.x2, state.x, sx)
           * _gauss_mass(region.y1, region.y2, state.y, sy))
    return float(min(1.0, max(0.0, num / den)))


def interaction_strength(state_i: FieldState, state_j: FieldState,
                         params: FieldParams = FieldParams()) -> InteractionResult:
    rect_i, rect_j = influence_region(state_i, params), influence_region(state_j, params)
    rol = overlap_ratio(rect_i, rect_j)
    if rol == 0.0:
        return InteractionResult(0.0, 0.0, 0.0, 0.0)
    inter = rect_i.intersect(rect_j)
    re_i = energy_ratio(state_i, inter, params)
    re_j = energy_ratio(state_j, inter, params)
    return InteractionResult(rol, re_i, re_j, rol * (re_i + re_j) / 2.0)


def interaction_strength_batch(xi, yi, vxi, xj, yj, vxj, params: FieldParams = FieldParams()):
    """Vectorised IS over arrays of pairs; agrees with :func:`interaction_strength`."""
    xi, yi, vxi, xj, yj, vxj = (np.asarray(a, dtype=float) for a in (xi, yi, vxi, xj, yj, vxj))
    cut = params.region_cut
    sxi, sxj = params.sigma_x0 + params.speed_gain * np.abs(vxi), params.sigma_x0 + params.speed_gain * np.abs(vxj)
    sy = params.sigma_y0
    ix1, ix2, iy1, iy2 = xi - cut * sxi, xi + cut * sxi, yi - cut * sy, yi + cut * sy
    jx1, jx2, jy1, jy2 = xj - cut * sxj, xj + cut * sxj, yj - cut * sy, yj + cut * sy
    ox1, ox2 = np.maximum(ix1, jx1), np.minimum(ix2, jx2)
    oy1, oy2 = np.maximum(iy1, jy1), np.minimum(iy2, jy2)
    ow, oh = np.maximum(ox2 - ox1, 0.0), np.maximum(oy2 - oy1, 0.0)
    rol = np.minimum(1.0, ow * oh / np.minimum((ix2 - ix1) * (iy2 - iy1), (jx2 - jx1) * (jy2 - jy1)))

    def re(xc, yc, sx, x1, x2, y1, y2):
        num = _gauss_mass(ox1, ox2, xc, sx) * _gauss_mass(oy1, oy2, yc, sy)
        den = _gauss_mass(x1, x2, xc, sx) * _gauss_mass(y1, y2, yc, sy)
        return np.clip(num / den, 0.0, 1.0)

    hit = rol > 0
    re_i = np.where(hit, re(xi, yi, sxi, ix1, ix2, iy1, iy2), 0.0)
    re_j = np.where(hit, re(xj, yj, sxj, jx1, jx2, jy1, jy2), 0.0)
    return np.where(hit, rol * (re_i + re_j) / 2.0, 0.0)


def _field_state(row) -> FieldState:
    return FieldState(float(row["x"]), float(row["y"]), float(row["vx"]))


def stage3_risk(case, table, params: FieldParams = FieldParams()) -> float:
    """Maximum IS between the LCV and any present neighbour over stage 3."""
    frames = case.stage_frames(3)
    if len(frames) == 0:
        raise StageWindowEmpty(f"stage 3 window of {case.case_id} is empty")
    lcv = table.vehicle(case.lcv_id)
    lcv = lcv.loc[lcv.index.intersection(frames)]
    if lcv.empty:
        raise StageWindowEmpty("LCV has no records in stage 3")
    best = 0.0
    for _, vid in case.neighbors.present():
        sv = table.vehicle(vid)
        common = lcv.index.intersection(sv.index)
        if len(common) == 0:
            continue
        a, b = lcv.loc[common], sv.loc[common]
        strength = interaction_strength_batch(a["x"], a["y"], a["vx"], b["x"], b["y"], b["vx"], params)
        best = max(best, float(np.max(strength)))
    return best


def risk_of(state_i: FieldState, state_j: FieldState, params: Optional[FieldParams] = None) -> float:
    return interaction_strength(state_i, state_j, params or FieldParams()).strength
