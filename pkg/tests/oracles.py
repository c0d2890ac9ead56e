"""Independent reference computations used as test oracles."""
import math

import numpy as np

from cautraj.interaction_risk import influence_region


def _midpoint_grid(x1, x2, y1, y2, n):
    hx, hy = (x2 - x1) / n, (y2 - y1) / n
    xs = x1 + hx * (np.arange(n) + 0.5)
    ys = y1 + hy * (np.arange(n) + 0.5)
    return np.meshgrid(xs, ys, indexing="ij"), hx * hy


def riemann_energy(state, x1, x2, y1, y2, params, n=200):
    """Midpoint-rule integral of the vehicle's Gaussian field over a rectangle."""
    if x2 <= x1 or y2 <= y1:
        return 0.0
    sx = params.sigma_x0 + params.speed_gain * abs(state.vx)
    sy = params.sigma_y0
    (X, Y), cell = _midpoint_grid(x1, x2, y1, y2, n)
    f = params.peak_energy * np.exp(-0.5 * (((X - state.x) / sx) ** 2 + ((Y - state.y) / sy) ** 2))
    return float(f.sum() * cell)


def riemann_strength(si, sj, params, n=200):
    """Interaction strength with both energy shares integrated on n x n grids."""
    ri, rj = influence_region(si, params), influence_region(sj, params)
    ox1, ox2 = max(ri.x1, rj.x1), min(ri.x2, rj.x2)
    oy1, oy2 = max(ri.y1, rj.y1), min(ri.y2, rj.y2)
    if ox2 <= ox1 or oy2 <= oy1:
        return 0.0
    rol = (ox2 - ox1) * (oy2 - oy1) / min(ri.area, rj.area)
    re = []
    for s, r in ((si, ri), (sj, rj)):
        re.append(riemann_energy(s, ox1, ox2, oy1, oy2, params, n)
                  / riemann_energy(s, r.x1, r.x2, r.y1, r.y2, params, n))
    return min(1.0, rol) * (re[0] + re[1]) / 2.0


def smoothed_abs(vy, dt, window=0.5):
    """Centred moving average of ``|vy|`` over an odd number of samples spanning ``window``."""
    k = max(1, int(round(window / dt)))
    k += (k % 2 == 0)
    a = np.abs(np.asarray(vy, dtype=float))
    padded = np.pad(a, k // 2, mode="edge")
    return np.convolve(padded, np.ones(k) / k, mode="valid")


def interior_maxima(a, floor_frac=0.01):
    """Indices of strict interior local maxima above ``floor_frac`` of the peak."""
    a = np.asarray(a, dtype=float)
    if a.size < 3:
        return []
    # collapse runs of equal values so a flat-topped peak counts once
    keep = np.concatenate([[True], a[1:] != a[:-1]])
    idx = np.flatnonzero(keep)
    b = a[idx]
    floor = floor_frac * float(a.max())
    return [int(idx[i]) for i in range(1, b.size - 1)
            if b[i] > b[i - 1] and b[i] > b[i + 1] and b[i] > floor]


def analytic_arc(v, radius, t):
    w = v / radius
    return radius * math.sin(w * t), radius * (1.0 - math.cos(w * t))


def central_jacobian(fn, z, rel_step=1e-6):
    """Central-difference Jacobian of ``fn`` at ``z``."""
    z = np.asarray(z, dtype=float)
    cols = []
    for k in range(z.size):
        h = rel_step * max(1.0, abs(z[k]))
        e = np.zeros_like(z)
        e[k] = h
        cols.append((fn(z + e) - fn(z - e)) / (2.0 * h))
    return np.column_stack(cols)
