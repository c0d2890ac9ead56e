import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cautraj.causal.weights import CausalWeights, WeightModel
from cautraj.errors import (ConfigError, DimensionMismatch, NoProgress, NonMonotonicAbscissa)
from cautraj.harness.synthetic import LANES, standard_scenario, straight_scenario
from cautraj.interaction_risk import FieldParams, FieldState, field_value
from cautraj.planner.mpc import (COST_TERMS, MpcConfig, PlannedTrajectory, mpc_cost, plan_trajectory,
                                 prediction_matrices, solve_step, with_overrides)
from cautraj.planner.potential import attractive_potential, repulsive_potential, total_potential
from cautraj.planner.reference import lateral_grid, spline_reference, valley_search
from cautraj.planner.scenario import Scenario, SvTrack
from cautraj.vehicle_model import ControlInput, VehicleState, linearize, step

P = FieldParams()


# ------------------------------------------------------------ potential

def test_no_svs_means_no_repulsion():
    assert repulsive_potential([], 3.0, 1.0) == 0.0


def test_single_sv_equals_its_field():
    sv = FieldState(10.0, 3.5, 20.0)
    assert repulsive_potential([sv], 14.0, 2.0) == pytest.approx(field_value(sv, 14.0, 2.0))


@given(st.lists(st.tuples(st.floats(-50, 50), st.floats(-5, 5), st.floats(0, 40)), min_size=2, max_size=4))
def test_repulsion_is_additive(raw):
    svs = [FieldState(*r) for r in raw]
    parts = sum(repulsive_potential([s], 1.0, 0.5) for s in svs)
    assert repulsive_potential(svs, 1.0, 0.5) == pytest.approx(parts, rel=1e-12, abs=1e-300)


def test_attraction_is_gain_times_distance():
    assert attractive_potential((3.0, 4.0), 0.0, 0.0, gain=20.0) == pytest.approx(100.0)
    assert attractive_potential((3.0, 4.0), 0.0, 0.0, gain=40.0) == pytest.approx(200.0)
    assert total_potential([], (3.0, 4.0), 0.0, 0.0) == pytest.approx(100.0)


# ------------------------------------------------------------ valley

def test_lateral_grid_contains_anchor():
    g = lateral_grid(-0.85, 4.35, 0.1, 3.5)
    assert np.min(np.abs(g - 3.5)) < 1e-12
    assert g[0] >= -0.85 - 1e-12 and g[-1] <= 4.35 + 1e-12


def test_valley_without_svs_is_destination_line():
    grid = lateral_grid(-0.85, 4.35, 0.1, 3.5)
    pts = valley_search([], (200.0, 3.5), np.arange(4, 44, 4.0), grid, P, 20.0, 3.5)
    assert np.allclose(pts[:, 1], 3.5)


def test_valley_leaves_blocking_sv():
    grid = lateral_grid(-0.85, 4.35, 0.1, 3.5)
    blocked = valley_search([FieldState(20.0, 3.5, 0.0)], (200.0, 3.5), [20.0], grid,
                            FieldParams(peak_energy=1e4), 20.0, 3.5)
    assert abs(blocked[0, 1] - 3.5) > 0.5


def test_valley_is_symmetric_between_mirrored_svs():
    grid = lateral_grid(-3.0, 3.0, 0.1, 0.0)
    params = FieldParams(peak_energy=50.0)
    svs = [FieldState(20.0, 4.0, 0.0), FieldState(20.0, -4.0, 0.0)]
    pts = valley_search(svs, (200.0, 0.0), [18.0, 20.0, 22.0], grid, params, 20.0, 0.0)
    assert np.allclose(pts[:, 1], 0.0, atol=1e-12)
    up = valley_search([FieldState(20.0, 0.7, 0.0)], (200.0, 0.0), [20.0], grid, params, 20.0, 0.0)
    down = valley_search([FieldState(20.0, -0.7, 0.0)], (200.0, 0.0), [20.0], grid, params, 20.0, 0.0)
    assert up[0, 1] == pytest.approx(-down[0, 1], abs=1e-12) and up[0, 1] < 0


# ------------------------------------------------------------ spline

def test_spline_through_collinear_knots_is_the_line():
    pts = np.array([[0.0, 1.0], [10.0, 2.0], [20.0, 3.0], [30.0, 4.0]])
    ref = spline_reference(pts, 20.0, 0.2, 5)
    assert np.allclose(ref[:, 1], 1.0 + 0.1 * ref[:, 0], atol=1e-9)
    assert np.allclose(ref[:, 3], math.atan(0.1))
    step_len = np.hypot(*np.diff(ref[:, :2], axis=0).T)
    assert np.allclose(step_len, 4.0, atol=1e-9)


def test_spline_reproduces_a_parabola():
    xs = np.arange(0.0, 50.0, 5.0)
    ref = spline_reference(np.column_stack([xs, 0.01 * xs ** 2]), 20.0, 0.2, 8)
    assert np.allclose(ref[:, 1], 0.01 * ref[:, 0] ** 2, atol=1e-6)
    assert np.allclose(ref[:, 3], np.arctan(0.02 * ref[:, 0]), atol=1e-6)
    # arc length of each step against the closed form of the parabola's arc
    arc = lambda x: (0.02 * x * math.sqrt(1 + (0.02 * x) ** 2) + math.asinh(0.02 * x)) / 0.04  # noqa: E731
    gaps = np.diff([arc(x) for x in ref[:, 0]])
    assert np.allclose(gaps, 4.0, atol=1e-3)


def test_spline_needs_three_increasing_knots():
    with pytest.raises(NonMonotonicAbscissa):
        spline_reference([[0, 0], [1, 1]], 20.0, 0.2, 3)
    with pytest.raises(NonMonotonicAbscissa):
        spline_reference([[0, 0], [2, 1], [1, 1]], 20.0, 0.2, 3)


# ------------------------------------------------------------ cost

def _cfg2(**kw):
    return MpcConfig(Np=2, Nc=2, tau=(1, 2, 3, 4, 5, 6), **kw)


def test_perfect_tracking_costs_nothing():
    cfg = MpcConfig()
    S = np.tile([0.0, 0.0, 20.0, 0.0], (cfg.Np, 1))
    c = mpc_cost(S, np.zeros((cfg.Nc, 2)), S, cfg, [0.0, 0.0])
    assert c["total"] == 0.0


def test_cost_matches_hand_computation():
    S = np.array([[1.0, 0.0, 10.0, 0.0], [2.0, 1.0, 10.0, 0.1]])
    R = np.array([[0.0, 0.0, 10.0, 0.0], [2.0, 0.0, 9.0, 0.0]])
    U = np.array([[1.0, 0.1], [0.0, 0.1]])
    c = mpc_cost(S, U, R, _cfg2(), [0.0, 0.0])
    # J1 = 1, J2 = 1, J3 = 1, J4 = 0.01, J5 = 1 + 1, J6 = 0.01
    assert c["total"] == pytest.approx(1 + 2 + 3 + 4 * 0.01 + 5 * 2 + 6 * 0.01, abs=1e-9)

    svs = {"fo": np.array([[5.0, 0.0, 12.0], [8.0, 0.0, 12.0]])}
    w = CausalWeights([0.5, 0.0, 0.0], [2.0, 0.0, 0.0])
    cc = mpc_cost(S, U, R, _cfg2(), [0.0, 0.0], "causal", w, svs)
    assert cc["J_alpha"] == pytest.approx(0.5 * (16 + 36), abs=1e-9)
    assert cc["J_beta"] == pytest.approx(2.0 * (4 + 4), abs=1e-9)
    assert cc["total"] == pytest.approx(c["total"] + 26 + 16, abs=1e-9)


def test_causal_with_zero_weights_reduces_to_baseline():
    S = np.array([[1.0, 0.0, 10.0, 0.0], [2.0, 1.0, 10.0, 0.1]])
    svs = {"ft": np.array([[5.0, 3.5, 12.0], [8.0, 3.5, 12.0]])}
    base = mpc_cost(S, np.ones((2, 2)), S * 0.9, _cfg2(), [0.0, 0.0])
    causal = mpc_cost(S, np.ones((2, 2)), S * 0.9, _cfg2(), [0.0, 0.0], "causal", CausalWeights.zeros(), svs)
    assert causal["total"] == base["total"]


def test_cost_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        mpc_cost(np.zeros((3, 4)), np.zeros((2, 2)), np.zeros((2, 4)), _cfg2(), [0, 0])
    with pytest.raises(DimensionMismatch):
        mpc_cost(np.zeros((2, 4)), np.zeros((2, 2)), np.zeros((2, 4)), _cfg2(), [0, 0], "causal",
                 CausalWeights.zeros(), {"xx": np.zeros((2, 3))})


def test_prediction_matrices_match_rollout():
    s0, u0 = np.array([0.0, 0.0, 20.0, 0.05]), np.array([0.5, 0.02])
    lin = linearize(s0, u0, 0.2)
    const, Gam = prediction_matrices(lin, s0, 4, 2)
    U = np.array([[0.3, 0.01], [-0.2, 0.03]])
    s, rolled = s0, []
    for k in range(4):
        s = lin.apply(s, U[min(k, 1)])
        rolled.append(s)
    assert np.allclose(const + Gam @ U.ravel(), np.concatenate(rolled), atol=1e-10)


# ------------------------------------------------------------ single step

def _straight_refs(cfg, v=20.0):
    return np.array([[v * cfg.dt * (i + 1), 0.0, v, 0.0] for i in range(cfg.Np)])


def test_straight_continuation_needs_no_control():
    cfg = MpcConfig()
    res = solve_step([0.0, 0.0, 20.0, 0.0], [0.0, 0.0], _straight_refs(cfg), {}, cfg)
    assert np.allclose(res.control, 0.0, atol=1e-4)
    assert res.status == "optimal"


def test_steering_bound_is_active_with_positive_multiplier():
    cfg = MpcConfig(delta_max=0.02)
    refs = _straight_refs(cfg)
    refs[:, 1], refs[:, 3] = 3.5, 0.3
    res = solve_step([0.0, 0.0, 20.0, 0.0], [0.0, 0.0], refs, {}, cfg)
    assert res.control[1] == pytest.approx(0.02, abs=1e-12)
    assert res.bound_multipliers[1] > 0


def test_step_rejects_wrong_reference_shape():
    cfg = MpcConfig()
    with pytest.raises(DimensionMismatch):
        solve_step([0, 0, 20, 0], [0, 0], np.zeros((cfg.Np + 1, 4)), {}, cfg)


# ------------------------------------------------------------ closed loop

def test_straight_scenario_holds_the_lane():
    plan = plan_trajectory(straight_scenario())
    assert abs(plan.states[-1, 1]) < 0.05 and abs(plan.states[-1, 3]) < 0.05
    assert plan.outcome == "arrived"


@pytest.mark.parametrize("mode", ["baseline", "causal"])
def test_standard_scenario_reaches_target_lane(mode):
    cfg = MpcConfig()
    sc = standard_scenario()
    w = CausalWeights([0.1, 0.1, 0.3], [0.1, 0.1, 0.3]) if mode == "causal" else None
    plan = plan_trajectory(sc, cfg, mode, weights=w)
    assert LANES.lane_of(plan.states[-1, 1]) == 2
    assert plan.bound_violations(cfg) == 0
    assert plan.outcome == "arrived"


def test_causal_is_smoother_on_standard_scenario(pipeline_dir):
    """Paired example: trained causal weights should not raise the lateral-speed spread.

    Known failure under the literal position/speed objective; see README.
    """
    model = WeightModel.load(pipeline_dir / "weights.json")
    sc = standard_scenario()
    base = plan_trajectory(sc, MpcConfig(), "baseline")
    causal = plan_trajectory(sc, MpcConfig(), "causal", weight_model=model)
    vy_base, vy_causal = float(np.std(base.vy)), float(np.std(causal.vy))
    assert vy_causal <= vy_base, f"vy std causal {vy_causal:.4f} > baseline {vy_base:.4f}"


def test_receding_horizon_applies_first_control():
    cfg = MpcConfig()
    plan = plan_trajectory(standard_scenario(), cfg)
    for k in range(plan.n - 1):
        nxt = step(plan.states[k], plan.controls[k], cfg.dt, cfg.wheelbase)
        assert np.allclose(nxt, plan.states[k + 1], atol=1e-12)
    assert np.allclose(np.diff(plan.t), cfg.dt)


def test_trajectory_csv_round_trip(tmp_path):
    plan = plan_trajectory(standard_scenario())
    plan.save_csv(tmp_path / "p.csv")
    back = PlannedTrajectory.load_csv(tmp_path / "p.csv")
    assert np.array_equal(back.states, plan.states)
    assert np.array_equal(back.controls, plan.controls)
    assert np.array_equal(back.costs, plan.costs, equal_nan=True)
    assert back.status == plan.status
    assert back.costs.shape[1] == len(COST_TERMS)


def test_blocked_target_lane_raises_no_progress():
    svs = {"ft": SvTrack.constant_velocity(0.0, 3.5, 20.0, 0.0, 10.0)}
    sc = Scenario("blocked", VehicleState(0, 0, 20, 0), ControlInput(0, 0), (200.0, 3.5), svs, LANES,
                  2, 10.0, v_des=20.0, field_params=FieldParams(peak_energy=1e3))
    with pytest.raises(NoProgress) as info:
        plan_trajectory(sc)
    partial = info.value.trajectory
    assert partial.status[-1] == "no_progress" and partial.n > 1


# ------------------------------------------------------------ config and scenario

def test_config_validation():
    with pytest.raises(ConfigError):
        MpcConfig(tau=(1, 1))
    with pytest.raises(ConfigError):
        MpcConfig(Np=2, Nc=3)
    with pytest.raises(ConfigError):
        MpcConfig(delta_max=math.pi / 2)
    with pytest.raises(ConfigError):
        MpcConfig.from_config({"dt": "fast"})
    cfg = MpcConfig.from_config({"Np": "8", "tau": "1, 1, 1, 1, 0, 0", "v_max": "auto"})
    assert (cfg.Np, cfg.Nc, cfg.tau[4], cfg.v_max) == (8, 8, 0.0, None)
    assert with_overrides(cfg, Nc=4).Nc == 4


def test_mode_and_weight_errors():
    with pytest.raises(ConfigError):
        plan_trajectory(straight_scenario(), mode="aggressive")
    with pytest.raises(ConfigError):
        plan_trajectory(straight_scenario(), mode="causal")


def test_scenario_round_trip(tmp_path):
    sc = standard_scenario()
    sc.save(tmp_path / "s.json")
    back = Scenario.load(tmp_path / "s.json")
    assert back.to_dict() == sc.to_dict()
    with pytest.raises(ConfigError):
        Scenario.from_dict({**sc.to_dict(), "destination": [120.0, 0.0]})
    with pytest.raises(ConfigError):
        Scenario.from_dict({k: v for k, v in sc.to_dict().items() if k != "lanes"})


def test_sv_track_interpolation_and_futures():
    tr = SvTrack([0.0, 1.0, 2.0], [0.0, 10.0, 30.0], [0, 0, 0], [10.0, 20.0, 20.0], [0, 0, 0])
    assert tr.state_at(0.5)[0] == pytest.approx(5.0)
    assert tr.state_at(3.0)[0] == pytest.approx(50.0)
    ext = tr.future(1.0, [0.5])
    rec = tr.future(1.0, [0.5], recorded=True)
    assert ext[0, 0] == pytest.approx(20.0) and rec[0, 0] == pytest.approx(20.0)
    assert tr.future(0.0, [1.0])[0, 0] == pytest.approx(10.0)
    with pytest.raises(ConfigError):
        SvTrack([0.0, 0.0], [0, 1], [0, 0], [1, 1], [0, 0])
