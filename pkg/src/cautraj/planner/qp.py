"""Primal active-set solver for small strictly convex QPs.

    minimise   0.5 z'Hz + c'z
    subject to lb <= z <= ub,  G z <= h

Simple bounds are handled by fixing variables, so a variable on an active
bound sits exactly on it. Starting from a feasible point the objective never
increases between iterates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import Infeasible


@dataclass
class QPResult:
    z: np.ndarray
    objective: float
    status: str  # "optimal" | "max_iter"
    iterations: int
    kkt_residual: float
    bound_multipliers: np.ndarray  # >0 at an active upper bound, <0 at an active lower bound
    ineq_multipliers: np.ndarray
    history: list = field(default_factory=list)


def _objective(H, c, z):
    return float(0.5 * z @ H @ z + c @ z)


def solve_qp(H, c, lb, ub, G=None, h=None, z0=None, tol=1e-6, max_iter=500) -> QPResult:
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    G = np.zeros((0, n)) if G is None else np.asarray(G, dtype=float).reshape(-1, n)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=float)
    if np.any(lb > ub):
        raise Infeasible("lower bound exceeds upper bound")
    z = np.clip(np.zeros(n) if z0 is None else np.asarray(z0, dtype=float).copy(), lb, ub)
    feas_tol = 1e-9 * max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if G.shape[0] and np.any(G @ z - h > feas_tol):
        raise Infeasible("starting point violates the inequality constraints")

    fixed = np.zeros(n, dtype=np.int8)  # -1 lower, +1 upper, 0 free
    working: list[int] = []
    history = [_objective(H, c, z)]
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)), float(np.max(np.abs(H), initial=0.0)))
    lam = np.zeros(0)
    status = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        g = H @ z + c
        free = np.flatnonzero(fixed == 0)
        Gw = G[working][:, free] if working else np.zeros((0, free.size))
        m = Gw.shape[0]
        K = np.zeros((free.size + m, free.size + m))
        K[:free.size, :free.size] = H[np.ix_(free, free)]
        K[:free.size, free.size:] = Gw.T
        K[free.size:, :free.size] = Gw
        rhs = np.concatenate([-g[free], np.zeros(m)])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        p = np.zeros(n)
        p[free] = sol[:free.size]
        lam = sol[free.size:]

        if np.max(np.abs(p), initial=0.0) <= 1e-12 * max(1.0, float(np.max(np.abs(z), initial=0.0))):
            # multipliers of the fixed bounds from stationarity
            r = g + (G[working].T @ lam if working else 0.0)
            mu = np.where(fixed == 1, -r, np.where(fixed == -1, r, 0.0))
            cand = [(mu[i], "b", i) for i in np.flatnonzero(fixed)]
            cand += [(lam[k], "g", k) for k in range(m)]
            worst = min(cand, default=None, key=lambda t: t[0])
            if worst is None or worst[0] >= -tol * scale:
                status = "optimal"
                break
            if worst[1] == "b":
                fixed[worst[2]] = 0
            else:
                working.pop(worst[2])
            continue

        alpha, block = 1.0, None
        for i in free:
            if p[i] > 0 and np.isfinite(ub[i]):
                a = (ub[i] - z[i]) / p[i]
            elif p[i] < 0 and np.isfinite(lb[i]):
                a = (lb[i] - z[i]) / p[i]
            else:
                continue
            if a < alpha:
                alpha, block = max(a, 0.0), ("b", i, 1 if p[i] > 0 else -1)
        if G.shape[0]:
            Gp = G @ p
            slack = h - G @ z
            for k in np.flatnonzero(Gp > 1e-14 * scale):
                if k in working:
                    continue
                a = max(slack[k], 0.0) / Gp[k]
                if a < alpha:
                    alpha, block = a, ("g", int(k), 0)
        z = np.clip(z + alpha * p, lb, ub)
        if block is not None:
            if block[0] == "b":
                i = block[1]
                z[i] = ub[i] if block[2] > 0 else lb[i]
                fixed[i] = block[2]
            else:
                working.append(block[1])
        history.append(_objective(H, c, z))

    # final multipliers and KKT residual
    full_lam = np.zeros(G.shape[0])
    for k, idx in enumerate(working):
        if k < lam.shape[0]:
            full_lam[idx] = lam[k]
    r = H @ z + c + G.T @ full_lam
    mu = np.where(fixed != 0, -r, 0.0)
    stat = r + mu
    viol = max(float(np.max(G @ z - h, initial=0.0)) if G.shape[0] else 0.0, 0.0)
    dual = max(float(-np.min(full_lam, initial=0.0)), float(-np.min(mu * fixed, initial=0.0)))
    kkt = max(float(np.max(np.abs(stat), initial=0.0)), viol, dual)
    return QPResult(z, _objective(H, c, z), status, it, kkt, mu, full_lam, history)
