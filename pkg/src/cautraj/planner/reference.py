"""Valley search over the potential field and spline reference states."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from ..errors import NonMonotonicAbscissa
from .potential import total_potential

_ARC_SAMPLES = 40  # per knot interval


def lateral_grid(y_min, y_max, spacing=0.1, anchor=None):
    """Grid over ``[y_min, y_max]`` with ``anchor`` (default ``y_min``) on a node."""
    anchor = y_min if anchor is None else anchor
    k_lo = math.ceil((y_min - anchor) / spacing - 1e-9)
    k_hi = math.floor((y_max - anchor) / spacing + 1e-9)
    return anchor + spacing * np.arange(k_lo, k_hi + 1)


def valley_search(svs, dest, x_samples, y_grid, params, gain, prefer_y):
    """Lateral minimiser of the total potential at each longitudinal sample.

    Ties (within 1e-12 relative) go to the grid point closest to
    ``prefer_y``.
    """
    xs = np.asarray(x_samples, dtype=float)
    if xs.size == 0:
        return np.empty((0, 2))
    X, Yg = np.meshgrid(xs, y_grid, indexing="ij")
    E = total_potential(svs, dest, X, Yg, params, gain)
    best = E.min(axis=1, keepdims=True)
    tie = E <= best + 1e-12 * np.maximum(np.abs(best), 1.0)
    dist = np.where(tie, np.abs(y_grid[None, :] - prefer_y), np.inf)
    idx = np.argmin(dist, axis=1)
    return np.column_stack([xs, y_grid[idx]])


def spline_reference(points, v_des, dt, n_steps, start=0):
    """Reference ``[x, y, v, phi]`` at arc lengths ``(start + i) * v_des * dt``
    from the first knot, ``i = 0..n_steps-1``.

    ``points`` are knots with strictly increasing x. The spline uses
    not-a-knot end conditions so any cubic (lines and parabolas included) is
    reproduced exactly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise NonMonotonicAbscissa("spline reference needs at least 3 knots")
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise NonMonotonicAbscissa("knot abscissae must be strictly increasing")
    spline = CubicSpline(pts[:, 0], pts[:, 1])
    slope = spline.derivative()
    xg = np.linspace(pts[0, 0], pts[-1, 0], _ARC_SAMPLES * (pts.shape[0] - 1) + 1)
    arc = cumulative_trapezoid(np.sqrt(1.0 + slope(xg) ** 2), xg, initial=0.0)
    targets = v_des * dt * np.arange(start, start + n_steps)
    out = np.empty((n_steps, 4))
    for i, s in enumerate(targets):
        if s <= arc[-1]:
            xr = float(np.interp(s, arc, xg))
            yr, phi = float(spline(xr)), math.atan(float(slope(xr)))
        else:
            # continue straight along the end tangent
            phi = math.atan(float(slope(xg[-1])))
            extra = s - arc[-1]
            xr = xg[-1] + extra * math.cos(phi)
            yr = float(spline(xg[-1])) + extra * math.sin(phi)
        out[i] = (xr, yr, v_des, phi)
    return out
