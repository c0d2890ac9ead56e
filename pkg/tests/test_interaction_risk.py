import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import riemann_energy, riemann_strength

from cautraj.errors import DegenerateRect, StageWindowEmpty
from cautraj.interaction_risk import (FieldParams, FieldState, InfluenceRect, energy_ratio,
                                      field_value, influence_region, interaction_strength,
                                      interaction_strength_batch, overlap_ratio, stage3_risk)
from cautraj.trajectory_data import NeighborSet, StagedLaneChangeCase

P = FieldParams()
coord = st.floats(-100, 100, allow_nan=False)
speed = st.floats(-40, 40, allow_nan=False)


def test_field_peaks_at_centre():
    assert field_value(FieldState(3.0, 1.0, 20.0), 3.0, 1.0) == pytest.approx(P.peak_energy)


def test_field_one_sigma_longitudinal():
    s = FieldState(0.0, 0.0, 10.0)
    sx = P.sigma_x0 + P.speed_gain * 10.0
    assert field_value(s, sx, 0.0) == pytest.approx(P.peak_energy * math.exp(-0.5))


def test_faster_vehicle_reaches_further():
    slow, fast = FieldState(0.0, 0.0, 0.0), FieldState(0.0, 0.0, 30.0)
    assert field_value(fast, 10.0, 0.0) > field_value(slow, 10.0, 0.0)


def test_region_from_sigmas():
    params = FieldParams(sigma_x0=10.0, sigma_y0=2.0, speed_gain=0.0, region_cut=3.0)
    assert influence_region(FieldState(0.0, 0.0, 25.0), params) == InfluenceRect(-30, 30, -6, 6)


def test_region_widens_with_speed_and_base_spread_at_rest():
    a = influence_region(FieldState(0, 0, 10.0))
    b = influence_region(FieldState(0, 0, 20.0))
    assert (b.x2 - b.x1) > (a.x2 - a.x1)
    rest = influence_region(FieldState(0, 0, 0.0))
    assert rest.x2 - rest.x1 == pytest.approx(2 * P.region_cut * P.sigma_x0)


def test_overlap_ratio_cases():
    r = InfluenceRect(0, 10, 0, 4)
    assert overlap_ratio(r, r) == 1.0
    assert overlap_ratio(r, InfluenceRect(20, 30, 0, 4)) == 0.0
    assert overlap_ratio(r, InfluenceRect(5, 15, 0, 4)) == pytest.approx(0.5)
    with pytest.raises(DegenerateRect):
        overlap_ratio(r, InfluenceRect(0, 0, 0, 4))


def test_energy_ratio_full_empty_half():
    s = FieldState(0.0, 0.0, 15.0)
    r = influence_region(s)
    assert energy_ratio(s, r) == pytest.approx(1.0)
    assert energy_ratio(s, InfluenceRect(1, 1, 0, 1)) == 0.0
    half = InfluenceRect(0.0, r.x2, r.y1, r.y2)
    assert energy_ratio(s, half) == pytest.approx(0.5, abs=1e-12)
    oracle = riemann_energy(s, *_xyxy(half), P) / riemann_energy(s, *_xyxy(r), P)
    assert energy_ratio(s, half) == pytest.approx(oracle, abs=1e-4)


def _xyxy(r):
    return r.x1, r.x2, r.y1, r.y2


def test_far_apart_is_zero_and_colocated_is_one():
    a = FieldState(0.0, 0.0, 20.0)
    assert interaction_strength(a, FieldState(500.0, 0.0, 20.0)).strength == 0.0
    res = interaction_strength(a, a)
    assert (res.rol, res.re_i, res.re_j, res.strength) == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_half_overlap_matches_riemann_oracle():
    params = FieldParams(speed_gain=0.0)
    a = FieldState(0.0, 0.0, 0.0)
    b = FieldState(params.region_cut * params.sigma_x0, 0.0, 0.0)  # regions overlap by half
    res = interaction_strength(a, b, params)
    assert res.rol == pytest.approx(0.5)
    assert res.strength == pytest.approx(riemann_strength(a, b, params), abs=1e-4)


@given(coord, coord, speed, coord, coord, speed)
def test_strength_is_bounded_and_symmetric(x1, y1, v1, x2, y2, v2):
    a, b = FieldState(x1, y1 / 10, v1), FieldState(x2, y2 / 10, v2)
    s_ab = interaction_strength(a, b).strength
    assert 0.0 <= s_ab <= 1.0
    assert interaction_strength(b, a).strength == pytest.approx(s_ab, abs=1e-15)


@given(st.lists(st.tuples(coord, coord, speed, coord, coord, speed), min_size=1, max_size=20))
def test_batch_agrees_with_scalar(pairs):
    arr = np.array(pairs)
    arr[:, [1, 4]] /= 10
    batch = interaction_strength_batch(*arr.T)
    for k, (x1, y1, v1, x2, y2, v2) in enumerate(arr):
        ref = interaction_strength(FieldState(x1, y1, v1), FieldState(x2, y2, v2)).strength
        assert batch[k] == pytest.approx(ref, abs=1e-12)


def test_params_validate_and_load_from_config():
    with pytest.raises(ValueError):
        FieldParams(sigma_x0=0.0)
    p = FieldParams.from_config({"sigma_x0": "5", "speed_gain": "0.1"})
    assert (p.sigma_x0, p.speed_gain, p.sigma_y0) == (5.0, 0.1, 1.5)


# -------------------------------------------------------------- stage 3

def _scene(rows_by_vehicle):
    import io

    import pandas as pd

    from cautraj.trajectory_data import load_trajectories

    rows = []
    for vid, track in rows_by_vehicle.items():
        for f, (x, y, vx) in enumerate(track):
            rows.append({"frame": f, "vehicle_id": vid, "x": x, "y": y, "vx": vx, "vy": 0.0, "ax": 0.0,
                         "ay": 0.0, "lane_id": 1 if y < 1.75 else 2, "length": 4.6, "width": 1.8})
    return load_trajectories(io.StringIO(pd.DataFrame(rows).to_csv(index=False)))


def _case(neighbors):
    return StagedLaneChangeCase(1, neighbors, 0, 2, 4, 8, 1, 2)


def test_no_neighbours_gives_zero_risk():
    table = _scene({1: [(4.0 * k, 3.5, 20.0) for k in range(8)]})
    assert stage3_risk(_case(NeighborSet()), table) == 0.0


def test_single_constant_neighbour_equals_pair_strength():
    table = _scene({1: [(4.0 * k, 3.5, 20.0) for k in range(8)],
                    2: [(25.0 + 4.0 * k, 3.5, 20.0) for k in range(8)]})
    pair = interaction_strength(FieldState(16.0, 3.5, 20.0), FieldState(41.0, 3.5, 20.0)).strength
    assert stage3_risk(_case(NeighborSet(ft=2)), table) == pytest.approx(pair, rel=1e-12)


def test_converging_neighbour_dominates_at_closest_frame():
    lcv = [(4.0 * k, 3.5, 20.0) for k in range(8)]
    steady = [(60.0 + 4.0 * k, 3.5, 20.0) for k in range(8)]
    closing = [(-40.0 + 6.0 * k, 3.5, 30.0) for k in range(8)]
    table = _scene({1: lcv, 2: steady, 3: closing})
    best = 0.0
    for f in range(4, 8):  # exhaustive frame x pair scan of stage 3
        me = FieldState(*lcv[f])
        for track in (steady, closing):
            best = max(best, interaction_strength(me, FieldState(*track[f])).strength)
    risk = stage3_risk(_case(NeighborSet(ft=2, bt=3)), table)
    assert risk == pytest.approx(best, rel=1e-12)
    at_end = interaction_strength(FieldState(*lcv[7]), FieldState(*closing[7])).strength
    assert risk == pytest.approx(at_end, rel=1e-12)


def test_empty_stage3_window_raises():
    table = _scene({1: [(4.0 * k, 3.5, 20.0) for k in range(8)]})
    with pytest.raises(StageWindowEmpty):
        stage3_risk(StagedLaneChangeCase(1, NeighborSet(), 0, 2, 4, 4, 1, 2), table)
