"""Planned-versus-reference comparison metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Union

import numpy as np

from ..errors import NoOverlapInTime
from ..planner.mpc import MpcConfig, PlannedTrajectory

METRIC_NAMES = (
    "max_trajectory_deviation", "mean_lateral_speed_deviation", "max_lateral_speed_deviation",
    "lateral_speed_std", "yaw_std", "accel_std", "violations",
)


@dataclass
class ComparisonMetrics:
    max_trajectory_deviation: float  # m
    mean_lateral_speed_deviation: float  # m/s
    max_lateral_speed_deviation: float  # m/s
    lateral_speed_std: float  # m/s, planned
    yaw_std: float  # rad, planned
    accel_std: float  # m/s^2, planned
    violations: int

    def to_dict(self):
        return asdict(self)


def _reference_arrays(reference):
    if isinstance(reference, PlannedTrajectory):
        return reference.t, reference.states[:, 0], reference.states[:, 1], reference.vy
    t = np.asarray(reference["t"], dtype=float)
    x = np.asarray(reference["x"], dtype=float)
    y = np.asarray(reference["y"], dtype=float)
    vy = np.asarray(reference["vy"], dtype=float) if "vy" in reference else np.gradient(y, t)
    return t, x, y, vy


def compute_metrics(planned: PlannedTrajectory, reference: Union[PlannedTrajectory, Mapping, None],
                    config: Optional[MpcConfig] = None) -> ComparisonMetrics:
    """Deviations on the reference timestamps covered by the plan; spreads over the plan.

    The planned trajectory is linearly interpolated onto the reference times
    inside the overlap of both time ranges. Without a reference the
    deviation fields are NaN.
    """
    accel = planned.applied_controls()[:, 0]
    spreads = dict(
        lateral_speed_std=float(np.std(planned.vy)),
        yaw_std=float(np.std(planned.states[:, 3])),
        accel_std=float(np.std(accel)) if accel.size else 0.0,
        violations=planned.bound_violations(config or MpcConfig()),
    )
    if reference is None:
        return ComparisonMetrics(math.nan, math.nan, math.nan, **spreads)
    rt, rx, ry, rvy = _reference_arrays(reference)
    pt = planned.t
    tol = 1e-9
    inside = (rt >= pt[0] - tol) & (rt <= pt[-1] + tol)
    if not inside.any():
        raise NoOverlapInTime(
            f"planned [{pt[0]:.3f}, {pt[-1]:.3f}] s and reference [{rt[0]:.3f}, {rt[-1]:.3f}] s do not overlap")
    tq = np.clip(rt[inside], pt[0], pt[-1])
    px = np.interp(tq, pt, planned.states[:, 0])
    py = np.interp(tq, pt, planned.states[:, 1])
    pvy = np.interp(tq, pt, planned.vy)
    dev = np.hypot(px - rx[inside], py - ry[inside])
    dvy = np.abs(pvy - rvy[inside])
    return ComparisonMetrics(
        max_trajectory_deviation=float(dev.max()),
        mean_lateral_speed_deviation=float(dvy.mean()),
        max_lateral_speed_deviation=float(dvy.max()),
        **spreads,
    )


def five_number_summary(values):
    """``min, q1, median, q3, max`` over the finite values (NaN when none)."""
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {"min": math.nan, "q1": math.nan, "median": math.nan, "q3": math.nan,
                "max": math.nan, "n": 0}
    q = np.quantile(v, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]), "q3": float(q[3]),
            "max": float(q[4]), "n": int(v.size)}
