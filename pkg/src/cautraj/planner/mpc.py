"""Rolling-horizon MPC on the linearised bicycle model.

Each step linearises once at ``(current state, previous control)``, condenses
the prediction over ``Np`` steps into a QP in the ``Nc`` controls plus soft
slacks on yaw and speed, and applies the first control. In causal mode the
objective also penalises the longitudinal position and speed differences to
each SV, weighted by :class:`CausalWeights`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np

from ..causal.weights import SVS, CausalWeights, WeightModel, predict_weights
from ..config import as_float, as_float_list, as_int, read_kv
from ..errors import ConfigError, DimensionMismatch, Infeasible, NoProgress
from ..vehicle_model import WHEELBASE, linearize, step
from .potential import ATTRACTIVE_GAIN
from .qp import solve_qp
from .reference import lateral_grid, spline_reference, valley_search
from .scenario import Scenario

MODES = ("baseline", "causal")
COST_TERMS = ("J1", "J2", "J3", "J4", "J5", "J6", "J_alpha", "J_beta")
RATE_MARGIN = 1e-12


@dataclass(frozen=True)
class MpcConfig:
    dt: float = 0.2
    Np: int = 5
    Nc: int = 5
    tau: tuple = (1.0, 1.0, 0.5, 0.5, 0.1, 0.1)
    delta_max: float = math.pi / 4
    ddelta_max: float = math.pi / 6
    a_acc: float = 6.0
    a_dec: float = 6.0
    phi_max: float = math.pi / 6
    v_max: Optional[float] = None  # None: 1.5x the initial speed
    slack_penalty: float = 1e3
    wheelbase: float = WHEELBASE
    attractive_gain: float = ATTRACTIVE_GAIN
    lateral_spacing: float = 0.1
    edge_margin: float = 0.9  # keeps the vehicle centre half a car width inside the road
    arrival_tol: float = 0.3
    lateral_tol: float = 0.15
    vy_tol: float = 0.1
    settle_time: float = 0.0  # how long the lateral arrival test must hold
    progress_window: float = 2.0
    qp_tol: float = 1e-6
    qp_max_iter: int = 500

    def __post_init__(self):
        object.__setattr__(self, "tau", tuple(float(t) for t in self.tau))
        if len(self.tau) != 6 or any(t < 0 for t in self.tau):
            raise ConfigError("tau needs six nonnegative weights")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not (self.Np >= self.Nc >= 1):
            raise ConfigError("need Np >= Nc >= 1")
        for name in ("delta_max", "ddelta_max", "a_acc", "a_dec", "phi_max", "slack_penalty",
                     "wheelbase", "lateral_spacing", "arrival_tol", "lateral_tol", "vy_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.v_max is not None and not self.v_max > 0:
            raise ConfigError("v_max must be positive")
        if self.edge_margin < 0:
            raise ConfigError("edge_margin must be nonnegative")
        if self.delta_max >= math.pi / 2:
            raise ConfigError("delta_max must be below pi/2")

    @classmethod
    def from_config(cls, cfg: Mapping[str, str]):
        d = cls()
        v_max = cfg.get("v_max")
        try:
            return cls(
                dt=as_float(cfg, "dt", d.dt),
                Np=as_int(cfg, "Np", d.Np),
                Nc=as_int(cfg, "Nc", as_int(cfg, "Np", d.Nc)),
                tau=tuple(as_float_list(cfg, "tau")) if "tau" in cfg else d.tau,
                delta_max=as_float(cfg, "delta_max", d.delta_max),
                ddelta_max=as_float(cfg, "ddelta_max", d.ddelta_max),
                a_acc=as_float(cfg, "a_acc", d.a_acc),
                a_dec=as_float(cfg, "a_dec", d.a_dec),
                phi_max=as_float(cfg, "phi_max", d.phi_max),
                v_max=None if v_max in (None, "", "auto") else float(v_max),
                slack_penalty=as_float(cfg, "slack_penalty", d.slack_penalty),
                wheelbase=as_float(cfg, "wheelbase", d.wheelbase),
                attractive_gain=as_float(cfg, "attractive_gain", d.attractive_gain),
                lateral_spacing=as_float(cfg, "lateral_spacing", d.lateral_spacing),
                edge_margin=as_float(cfg, "edge_margin", d.edge_margin),
                arrival_tol=as_float(cfg, "arrival_tol", d.arrival_tol),
                lateral_tol=as_float(cfg, "lateral_tol", d.lateral_tol),
                vy_tol=as_float(cfg, "vy_tol", d.vy_tol),
                settle_time=as_float(cfg, "settle_time", d.settle_time),
                progress_window=as_float(cfg, "progress_window", d.progress_window),
                qp_tol=as_float(cfg, "qp_tol", d.qp_tol),
                qp_max_iter=as_int(cfg, "qp_max_iter", d.qp_max_iter),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        return cls.from_config(read_kv(path))

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class StepResult:
    control: np.ndarray
    status: str
    iterations: int
    kkt_residual: float
    slack: float
    costs: dict
    predicted: np.ndarray  # (Np, 4) linear-model prediction
    controls: np.ndarray  # (Nc, 2)
    bound_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    objective_history: list = field(default_factory=list)
    linearization: Optional[object] = None


def _sv_matrix(sv_states, Np):
    """Validate and stack SV futures as ``role -> (Np, >=3)`` arrays."""
    out = {}
    for role, arr in (sv_states or {}).items():
        if role not in SVS:
            raise DimensionMismatch(f"unknown SV role {role!r}")
        a = np.asarray(arr, dtype=float)
        if a.ndim != 2 or a.shape[0] != Np or a.shape[1] < 3:
            raise DimensionMismatch(f"{role} future must be ({Np}, >=3), got {a.shape}")
        out[role] = a
    return out


def _causal_terms(weights: Optional[CausalWeights], sv_states):
    """Nonzero ``(kind, weight, role)`` triples in a fixed order."""
    if weights is None:
        return []
    terms = []
    for kind, vec in (("alpha", weights.alpha), ("beta", weights.beta)):
        for i, role in enumerate(SVS):
            if vec[i] != 0.0 and role in sv_states:
                terms.append((kind, float(vec[i]), role))
    return terms


def mpc_cost(states, controls, references, config: MpcConfig, prev_control, mode="baseline",
             weights: Optional[CausalWeights] = None, sv_states=None, slacks=None):
    """Objective value and per-term breakdown for a predicted horizon.

    ``states`` are the predicted ``s_1..s_Np``; ``sv_states[role][i]`` holds
    the SV's ``(x, y, vx)`` at prediction step ``i + 1``. Rate terms compare
    each control with its predecessor, starting from ``prev_control``.
    """
    Np, Nc = config.Np, config.Nc
    S = np.asarray(states, dtype=float)
    U = np.asarray(controls, dtype=float)
    R = np.asarray(references, dtype=float)
    if S.shape != (Np, 4) or R.shape != (Np, 4):
        raise DimensionMismatch(f"states and references must be ({Np}, 4)")
    if U.shape != (Nc, 2):
        raise DimensionMismatch(f"controls must be ({Nc}, 2)")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    svs = _sv_matrix(sv_states, Np)
    err = S - R
    dU = np.diff(np.vstack([np.asarray(prev_control, dtype=float).reshape(1, 2), U]), axis=0)
    costs = {
        "J1": float(np.sum(err[:, 0] ** 2)),
        "J2": float(np.sum(err[:, 1] ** 2)),
        "J3": float(np.sum(err[:, 2] ** 2)),
        "J4": float(np.sum(err[:, 3] ** 2)),
        "J5": float(np.sum(dU[:, 0] ** 2)),
        "J6": float(np.sum(dU[:, 1] ** 2)),
        "J_alpha": 0.0,
        "J_beta": 0.0,
    }
    if mode == "causal":
        for kind, w, role in _causal_terms(weights, svs):
            if kind == "alpha":
                costs["J_alpha"] += w * float(np.sum((S[:, 0] - svs[role][:, 0]) ** 2))
            else:
                costs["J_beta"] += w * float(np.sum((S[:, 2] - svs[role][:, 2]) ** 2))
    eps = np.zeros(0) if slacks is None else np.asarray(slacks, dtype=float)
    costs["slack"] = config.slack_penalty * float(np.sum(eps ** 2))
    costs["total"] = (sum(t * costs[f"J{k + 1}"] for k, t in enumerate(config.tau))
                      + costs["J_alpha"] + costs["J_beta"] + costs["slack"])
    return costs


def prediction_matrices(lin, s0, Np, Nc):
    """Affine map ``S = const + Gam @ U`` for stacked states ``s_1..s_Np``.

    Controls beyond the control horizon repeat the last one.
    """
    const = np.empty(4 * Np)
    Gam = np.zeros((4 * Np, 2 * Nc))
    s = np.asarray(s0, dtype=float)
    G = np.zeros((4, 2 * Nc))
    for k in range(Np):
        j = min(k, Nc - 1)
        s = lin.A @ s + lin.C
        G = lin.A @ G
        G[:, 2 * j:2 * j + 2] += lin.B
        const[4 * k:4 * k + 4] = s
        Gam[4 * k:4 * k + 4] = G
    return const, Gam


def solve_step(state, prev_control, references, sv_states, config: MpcConfig, mode="baseline",
               weights: Optional[CausalWeights] = None, v_max: Optional[float] = None) -> StepResult:
    Np, Nc = config.Np, config.Nc
    s0 = np.asarray(state, dtype=float).reshape(4)
    u_prev = np.asarray(prev_control, dtype=float).reshape(2)
    R = np.asarray(references, dtype=float)
    if R.shape != (Np, 4):
        raise DimensionMismatch(f"references must be ({Np}, 4), got {R.shape}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    svs = _sv_matrix(sv_states, Np)
    v_max = config.v_max if v_max is None else v_max
    if v_max is None:
        v_max = 1.5 * max(s0[2], 1e-3)

    lin = linearize(s0, u_prev, config.dt, config.wheelbase)
    const, Gam = prediction_matrices(lin, s0, Np, Nc)
    nu, nz = 2 * Nc, 2 * Nc + 2 * Np
    phi_sl = nu + np.arange(Np)
    v_sl = nu + Np + np.arange(Np)

    # least-squares form: sum_r w_r (F_r z - g_r)^2
    rows, targets, wts = [], [], []

    def add(w, f, g):
        if w != 0.0:
            rows.append(f)
            targets.append(g)
            wts.append(w)

    def state_row(i, comp):
        f = np.zeros(nz)
        f[:nu] = Gam[4 * i + comp]
        return f, const[4 * i + comp]

    for comp in range(4):
        for i in range(Np):
            f, c0 = state_row(i, comp)
            add(config.tau[comp], f, R[i, comp] - c0)
    for comp, tau in ((0, config.tau[4]), (1, config.tau[5])):
        for j in range(Nc):
            f = np.zeros(nz)
            f[2 * j + comp] = 1.0
            g = 0.0
            if j == 0:
                g = u_prev[comp]
            else:
                f[2 * (j - 1) + comp] = -1.0
            add(tau, f, g)
    if mode == "causal":
        # Gap and speed terms act through acceleration only. Their residuals
        # are tens of metres, and the first-order x-phi coupling would turn
        # them into a spurious steering incentive.
        for kind, w, role in _causal_terms(weights, svs):
            comp, col = (0, 0) if kind == "alpha" else (2, 2)
            for i in range(Np):
                f, c0 = state_row(i, comp)
                f[1:nu:2] = 0.0
                add(w, f, svs[role][i, col] - c0)
    for k in np.concatenate([phi_sl, v_sl]):
        f = np.zeros(nz)
        f[k] = 1.0
        add(config.slack_penalty, f, 0.0)
    F = np.array(rows)
    w = np.array(wts)
    g = np.array(targets)
    H = 2.0 * F.T @ (w[:, None] * F)
    c = -2.0 * F.T @ (w * g)

    lb = np.empty(nz)
    ub = np.empty(nz)
    lb[0:nu:2], ub[0:nu:2] = -config.a_dec, config.a_acc
    lb[1:nu:2], ub[1:nu:2] = -config.delta_max, config.delta_max
    lb[nu:], ub[nu:] = 0.0, np.inf

    rate = config.ddelta_max * (1.0 - RATE_MARGIN)
    G_rows, h = [], []
    for j in range(Nc):
        f = np.zeros(nz)
        f[2 * j + 1] = 1.0
        base = 0.0
        if j == 0:
            base = u_prev[1]
        else:
            f[2 * (j - 1) + 1] = -1.0
        G_rows += [f, -f]
        h += [rate + base, rate - base]
    for i in range(Np):
        fphi, cphi = state_row(i, 3)
        fv, cv = state_row(i, 2)
        e = np.zeros(nz)
        e[phi_sl[i]] = 1.0
        G_rows += [fphi - e, -fphi - e]
        h += [config.phi_max - cphi, config.phi_max + cphi]
        e = np.zeros(nz)
        e[v_sl[i]] = 1.0
        G_rows += [fv - e, -fv - e]
        h += [v_max - cv, cv]
    G = np.array(G_rows)
    h = np.array(h)

    # feasible start: hold the previous control (clipped), slacks absorb state violations
    d0 = min(max(u_prev[1], -config.delta_max), config.delta_max)
    if abs(d0 - u_prev[1]) > rate:
        raise Infeasible("previous steering is outside the rate-reachable box")
    z0 = np.zeros(nz)
    z0[0:nu:2] = min(max(u_prev[0], -config.a_dec), config.a_acc)
    z0[1:nu:2] = d0
    S0 = const + Gam @ z0[:nu]
    phis, vs = S0[3::4], S0[2::4]
    z0[phi_sl] = np.maximum(np.abs(phis) - config.phi_max, 0.0) * (1 + 1e-9) + 1e-12
    z0[v_sl] = np.maximum(np.maximum(vs - v_max, -vs), 0.0) * (1 + 1e-9) + 1e-12
    z0[nu:] = np.where(z0[nu:] > 1e-12, z0[nu:], 0.0)

    res = solve_qp(H, c, lb, ub, G, h, z0, tol=config.qp_tol, max_iter=config.qp_max_iter)
    z = res.z
    U = z[:nu].reshape(Nc, 2)
    S = (const + Gam @ z[:nu]).reshape(Np, 4)
    slacks = z[nu:]
    costs = mpc_cost(S, U, R, config, u_prev, mode, weights, svs, slacks)
    return StepResult(
        control=U[0].copy(), status=res.status, iterations=res.iterations,
        kkt_residual=res.kkt_residual, slack=float(np.max(np.abs(slacks), initial=0.0)),
        costs=costs, predicted=S, controls=U, bound_multipliers=res.bound_multipliers,
        ineq_multipliers=res.ineq_multipliers, objective_history=res.history, linearization=lin)


CSV_COLUMNS = ("t", "x", "y", "v", "phi", "a", "delta", "J1", "J2", "J3", "J4", "J5", "J6",
               "J_alpha", "J_beta", "slack", "status")


@dataclass
class PlannedTrajectory:
    """Per-step record. Row ``k`` holds the state at ``t_k`` and the control applied from it.

    The final row is the terminal state; its control repeats the last applied
    control and its cost columns are NaN.
    """
    t: np.ndarray
    states: np.ndarray  # (n, 4)
    controls: np.ndarray  # (n, 2)
    costs: np.ndarray  # (n, 8) in COST_TERMS order
    slack: np.ndarray
    status: list
    initial_control: np.ndarray = field(default_factory=lambda: np.zeros(2))
    outcome: str = ""
    mode: str = "baseline"
    weights: Optional[CausalWeights] = None
    linearizations: list = field(default_factory=list)

    @property
    def vy(self):
        return self.states[:, 2] * np.sin(self.states[:, 3])

    @property
    def vx(self):
        return self.states[:, 2] * np.cos(self.states[:, 3])

    @property
    def n(self):
        return self.t.shape[0]

    def applied_controls(self):
        """Controls actually applied (all rows but the terminal one)."""
        return self.controls[:-1]

    def bound_violations(self, config: MpcConfig) -> int:
        u = self.applied_controls()
        seq = np.vstack([self.initial_control.reshape(1, 2), u])
        return int(np.sum(np.abs(u[:, 1]) > config.delta_max)
                   + np.sum(u[:, 0] > config.a_acc) + np.sum(u[:, 0] < -config.a_dec)
                   + np.sum(np.abs(np.diff(seq[:, 1])) > config.ddelta_max))

    def to_rows(self):
        rows = []
        for k in range(self.n):
            row = [self.t[k], *self.states[k], *self.controls[k], *self.costs[k], self.slack[k], self.status[k]]
            rows.append(row)
        return rows

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.to_rows():
                w.writerow([r if isinstance(r, str) else repr(float(r)) for r in row])

    @classmethod
    def load_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                from ..errors import MissingColumn
                raise MissingColumn(sorted(missing)[0])
            recs = list(reader)
        num = lambda k: np.array([float(r[k]) for r in recs])  # noqa: E731
        return cls(
            t=num("t"),
            states=np.column_stack([num(k) for k in ("x", "y", "v", "phi")]).reshape(-1, 4),
            controls=np.column_stack([num("a"), num("delta")]).reshape(-1, 2),
            costs=np.column_stack([num(k) for k in COST_TERMS]).reshape(-1, len(COST_TERMS)),
            slack=num("slack"),
            status=[r["status"] for r in recs],
        )


def resolve_weights(mode, scenario: Scenario, weights=None, weight_model: Optional[WeightModel] = None):
    if mode == "baseline":
        return None
    if weights is not None:
        return weights if isinstance(weights, CausalWeights) else CausalWeights.from_dict(weights)
    if weight_model is not None:
        if scenario.stage1 is None:
            raise ConfigError("causal mode with a weight model needs stage-1 conditions in the scenario")
        return predict_weights(weight_model, scenario.stage1)
    raise ConfigError("causal mode needs CausalWeights or a WeightModel")


def plan_reference(scenario: Scenario, state, t, config: MpcConfig):
    """Valley points ahead of ``state`` and the spline reference through them."""
    ds = scenario.v_des * config.dt
    xs = state[0] + ds * np.arange(1, 2 * config.Np + 1)
    grid = lateral_grid(scenario.lanes.y_min + config.edge_margin,
                        scenario.lanes.y_max - config.edge_margin,
                        config.lateral_spacing, scenario.target_center)
    valley = valley_search(scenario.sv_field_states(t), scenario.destination, xs, grid,
                           scenario.field_params, config.attractive_gain, scenario.target_center)
    # the first valley point sits one step ahead, so it is the first reference
    return valley, spline_reference(valley, scenario.v_des, config.dt, config.Np)


def plan_trajectory(scenario: Scenario, config: MpcConfig = MpcConfig(), mode="baseline",
                    weights=None, weight_model: Optional[WeightModel] = None,
                    keep_linearizations=False) -> PlannedTrajectory:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    w = resolve_weights(mode, scenario, weights, weight_model)
    dt = config.dt
    v_max = config.v_max if config.v_max is not None else 1.5 * max(scenario.lcv.v, 1e-3)
    s = scenario.lcv.as_array()
    u_prev = scenario.control.as_array()
    offsets = dt * np.arange(1, config.Np + 1)
    y_des = scenario.destination[1]
    n_steps = int(math.floor(scenario.t_total / dt + 1e-9))
    settle_n = max(1, int(round(config.settle_time / dt)))
    window_n = max(1, int(round(config.progress_window / dt)))

    ts, states, controls, costs, slacks, status, lins = [0.0], [s], [], [], [], [], []
    lat_err = [abs(s[1] - y_des)]
    settled = 0
    outcome = "timeout"

    def build(final_status):
        ctrl = controls + [controls[-1] if controls else u_prev]
        cst = costs + [[math.nan] * len(COST_TERMS)]
        return PlannedTrajectory(
            t=np.array(ts), states=np.array(states), controls=np.array(ctrl),
            costs=np.array(cst), slack=np.array(slacks + [0.0]), status=status + [final_status],
            initial_control=scenario.control.as_array(), outcome=outcome, mode=mode, weights=w,
            linearizations=lins)

    for k in range(n_steps):
        t = k * dt
        _, ref = plan_reference(scenario, s, t, config)
        res = solve_step(s, u_prev, ref, scenario.sv_futures(t, offsets), config, mode, w, v_max)
        u = res.control
        s = step(s, u, dt, config.wheelbase)
        controls.append(u)
        costs.append([res.costs[c] for c in COST_TERMS])
        slacks.append(res.slack)
        status.append(res.status)
        if keep_linearizations:
            lins.append(res.linearization)
        ts.append((k + 1) * dt)
        states.append(s)
        u_prev = u

        err = abs(s[1] - y_des)
        lat_err.append(err)
        vy = s[2] * math.sin(s[3])
        settled = settled + 1 if (err < config.lateral_tol and abs(vy) < config.vy_tol) else 0
        if math.hypot(s[0] - scenario.destination[0], s[1] - y_des) <= config.arrival_tol or settled >= settle_n:
            outcome = "arrived"
            break
        stalled = len(lat_err) > window_n and err >= lat_err[-1 - window_n]
        if stalled and err > scenario.lanes.width / 2:
            outcome = "no_progress"
            exc = NoProgress(f"lateral error {err:.3f} m not decreasing over {config.progress_window} s")
            exc.trajectory = build("no_progress")
            raise exc
    return build(outcome)


def with_overrides(config: MpcConfig, **kw) -> MpcConfig:
    return replace(config, **kw)
