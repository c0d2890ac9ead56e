"""Synthetic lane-change traffic and planning scenarios.

Each episode is one LCV with a leader in its own lane (FO) and a gap in the
adjacent lane bounded by FT and BT. The LCV cruises, then changes lanes with
a quintic lateral profile while its speed relaxes toward the target-lane flow,
a simple model of how drivers merge. Episodes are spaced far apart on the x
axis so they never see each other. All randomness comes from one seeded
generator, so a seed fully determines the output.
"""
from __future__ import annotations

import math

import numpy as np
import pandas as pd

from ..planner.scenario import Scenario, SvTrack
from ..factors import STAGE1_FACTORS
from ..trajectory_data import (COLUMNS, STAGE1_SECONDS, LaneGeometry, StagedLaneChangeCase,
                               TrajectoryTable)
from ..vehicle_model import ControlInput, VehicleState

LANES = LaneGeometry({1: 0.0, 2: 3.5}, 3.5)
FRAME_RATE = 5.0
EPISODE_SECONDS = 12.0
ONSET_SECONDS = 3.0
EPISODE_SPACING = 5000.0  # m between episodes
SPEED_RELAX = 2.0  # s, time constant of the LCV speed adaptation


def _quintic(s):
    s = np.clip(s, 0.0, 1.0)
    return 10 * s**3 - 15 * s**4 + 6 * s**5


def _quintic_rate(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 30 * s**2 - 60 * s**3 + 30 * s**4, 0.0)


def _quintic_acc(s):
    inside = (s > 0) & (s < 1)
    return np.where(inside, 60 * s - 180 * s**2 + 120 * s**3, 0.0)


def _track(vid, t, x, y, vx, vy, ax, ay, length, width, lanes):
    lane = np.array([lanes.lane_of(v) for v in y], dtype=np.int64)
    return pd.DataFrame({
        "frame": np.arange(t.size, dtype=np.int64), "vehicle_id": vid,
        "x": x, "y": y, "vx": vx, "vy": vy, "ax": ax, "ay": ay, "lane_id": lane,
        "length": length, "width": width,
    })


def _speed_wobble(rng, t):
    """Zero-mean smooth speed fluctuation ``(dv, dx, a)`` of a random amplitude."""
    amp = rng.uniform(0.0, 0.6)  # m/s
    w = 2 * math.pi / rng.uniform(4.0, 9.0)
    ph = rng.uniform(0.0, 2 * math.pi)
    dv = amp * (np.sin(w * t + ph) - math.sin(ph))
    dx = amp * ((math.cos(ph) - np.cos(w * t + ph)) / w - math.sin(ph) * t)
    return dv, dx, amp * w * np.cos(w * t + ph)


def _cruiser(rng, vid, t, x0, y0, v0, acc, lanes, offset):
    dv, dx, da = _speed_wobble(rng, t)
    x = offset + x0 + v0 * t + 0.5 * acc * t * t + dx
    period = rng.uniform(6.0, 10.0)
    phase = rng.uniform(0.0, 2 * math.pi)
    amp = rng.uniform(0.0, 0.1)
    w = 2 * math.pi / period
    y = y0 + amp * np.sin(w * t + phase)
    vy = amp * w * np.cos(w * t + phase)
    ay = -amp * w * w * np.sin(w * t + phase)
    return _track(vid, t, x, y, v0 + acc * t + dv, vy, acc + da, ay,
                  rng.uniform(4.2, 5.0), rng.uniform(1.7, 2.0), lanes)


def synthetic_episode(rng, episode: int, lanes: LaneGeometry = LANES, frame_rate=FRAME_RATE):
    """Rows for one lane-change episode (LCV id ``10e``, SVs ``10e+1..3``)."""
    dt = 1.0 / frame_rate
    t = np.arange(int(round(EPISODE_SECONDS * frame_rate))) * dt
    offset = episode * EPISODE_SPACING
    ids = sorted(lanes.centers)
    origin, target = (ids[0], ids[1]) if rng.random() < 0.5 else (ids[1], ids[0])
    yo, yt = lanes.center(origin), lanes.center(target)

    v0 = rng.uniform(18.0, 26.0)
    a1 = rng.uniform(-0.3, 0.3)
    flow = v0 + rng.uniform(-4.0, 4.0)
    duration = rng.uniform(4.0, 6.0)
    t_on = ONSET_SECONDS

    # LCV: pre-onset constant acceleration, then relaxation to the flow speed
    v_on = v0 + a1 * t_on
    pre = t < t_on
    tau = np.maximum(t - t_on, 0.0)
    v = np.where(pre, v0 + a1 * t, flow + (v_on - flow) * np.exp(-tau / SPEED_RELAX))
    ax = np.where(pre, a1, -(v_on - flow) / SPEED_RELAX * np.exp(-tau / SPEED_RELAX))
    x = np.where(pre, v0 * t + 0.5 * a1 * t * t,
                 v0 * t_on + 0.5 * a1 * t_on**2 + flow * tau
                 + (v_on - flow) * SPEED_RELAX * (1 - np.exp(-tau / SPEED_RELAX)))
    s = tau / duration
    y = yo + (yt - yo) * _quintic(s)
    vy = (yt - yo) * _quintic_rate(s) / duration
    ay = (yt - yo) * _quintic_acc(s) / duration**2
    dv, dx, da = _speed_wobble(rng, t)
    lcv = _track(10 * episode, t, offset + x + dx, y, v + dv, vy, ax + da, ay,
                 rng.uniform(4.2, 5.0), rng.uniform(1.7, 2.0), lanes)

    x_on = float(np.interp(t_on, t, x))
    gap = rng.uniform(25.0, 45.0)
    centre = x_on + rng.uniform(-8.0, 8.0)
    v_ft = flow + rng.uniform(-1.0, 1.0)
    v_bt = flow + rng.uniform(-1.0, 1.0)
    v_fo = v0 + rng.uniform(-4.0, 1.0)
    fo_ahead = rng.uniform(25.0, 50.0)
    rows = [lcv]
    rows.append(_cruiser(rng, 10 * episode + 1, t, x_on + fo_ahead - v_fo * t_on, yo, v_fo, 0.0, lanes, offset))
    rows.append(_cruiser(rng, 10 * episode + 2, t, centre + gap / 2 - v_ft * t_on, yt, v_ft,
                         rng.uniform(-0.2, 0.2), lanes, offset))
    rows.append(_cruiser(rng, 10 * episode + 3, t, centre - gap / 2 - v_bt * t_on, yt, v_bt,
                         rng.uniform(-0.2, 0.2), lanes, offset))
    return pd.concat(rows, ignore_index=True)


def generate_fixture(n_episodes=150, seed=0, lanes: LaneGeometry = LANES,
                     frame_rate=FRAME_RATE) -> TrajectoryTable:
    """A trajectory table with ``n_episodes`` independent lane changes."""
    rng = np.random.default_rng(seed)
    frames = [synthetic_episode(rng, e, lanes, frame_rate) for e in range(n_episodes)]
    df = pd.concat(frames, ignore_index=True)[list(COLUMNS)]
    df = df.sort_values(["vehicle_id", "frame"], kind="mergesort").reset_index(drop=True)
    return TrajectoryTable(df, 1.0 / frame_rate)


def lanes_config_text(lanes: LaneGeometry = LANES) -> str:
    ids = ",".join(str(i) for i in lanes.centers)
    centres = ",".join(repr(float(c)) for c in lanes.centers.values())
    return f"lane_ids = {ids}\nlane_centers = {centres}\nlane_width = {lanes.width!r}\n"


# ------------------------------------------------------------ scenarios

def scenario_from_case(case: StagedLaneChangeCase, table: TrajectoryTable, lanes: LaneGeometry,
                       sv_future="recorded") -> Scenario:
    """Replay scenario starting at the manoeuvre onset.

    The destination is the LCV position at the end of stage 3, the desired
    speed is its last observed speed and the recorded LCV path becomes the
    comparison reference.
    """
    dt = table.dt
    frames = range(case.t1_end, case.t3_end)
    lcv = table.vehicle(case.lcv_id).loc[list(frames)]
    t = (lcv["frame"].to_numpy() - case.t1_end) * dt
    first, last = lcv.iloc[0], lcv.iloc[-1]
    vx, vy = float(first["vx"]), float(first["vy"])
    svs = {}
    for role, vid in case.neighbors.present():
        rows = table.vehicle(vid)
        rows = rows.loc[rows.index.intersection(frames)]
        svs[role] = SvTrack((rows["frame"].to_numpy() - case.t1_end) * dt, rows["x"], rows["y"],
                            rows["vx"], rows["vy"])
    reference = {"t": t.tolist(), "x": lcv["x"].tolist(), "y": lcv["y"].tolist(),
                 "vx": lcv["vx"].tolist(), "vy": lcv["vy"].tolist()}
    return Scenario(
        name=case.case_id,
        lcv=VehicleState(float(first["x"]), float(first["y"]), math.hypot(vx, vy), math.atan2(vy, vx)),
        control=ControlInput(float(first["ax"]), 0.0),
        destination=(float(last["x"]), float(last["y"])),
        svs=svs,
        lanes=lanes,
        target_lane=case.target_lane,
        t_total=float(t[-1]),
        v_des=math.hypot(float(last["vx"]), float(last["vy"])),
        sv_future=sv_future,
        reference=reference,
        stage1=dict(case.stage1),
    )


def scenario_suite(n=10, seed=1000, lanes: LaneGeometry = LANES) -> list:
    """``n`` replay scenarios drawn from a fresh synthetic fixture."""
    from ..trajectory_data import extract_cases

    table = generate_fixture(n, seed, lanes)
    cases, _ = extract_cases(table, lanes)
    return [scenario_from_case(c, table, lanes) for c in cases]


def constant_velocity_stage1(lcv: VehicleState, svs, length=4.6, frame_rate=FRAME_RATE) -> dict:
    """Stage-1 factors for vehicles that held their current velocity over the window.

    Window means are taken over the same frames the extractor would use, with
    every vehicle ``length`` metres long.
    """
    dt = 1.0 / frame_rate
    n = int(round(STAGE1_SECONDS * frame_rate))
    t = -dt * np.arange(n, 0, -1)
    tracks = {"lc": (lcv.x + lcv.vx * t, lcv.y + lcv.vy * t, lcv.vx, lcv.vy)}
    for role, sv in svs.items():
        x, y, vx, vy = sv.state_at(0.0)
        tracks[role] = (x + vx * t, y + vy * t, vx, vy)
    out = {}
    for name in STAGE1_FACTORS:
        parts = name[:-1].split("_")
        if parts[0] == "d":
            a, b = parts[1], parts[2].rstrip("xy")
            if a not in tracks or b not in tracks:
                out[name] = None
            elif parts[2].endswith("y"):
                out[name] = float(np.mean(np.abs(tracks[b][1] - tracks[a][1])))
            else:
                gap = np.abs(tracks[b][0] - tracks[a][0]) - length
                out[name] = float(np.mean(np.maximum(gap, 0.0)))
        else:
            veh, sig = parts
            if veh not in tracks:
                out[name] = None
            else:
                out[name] = {"vx": float(tracks[veh][2]), "vy": float(tracks[veh][3])}.get(sig, 0.0)
    return out


def standard_scenario(lanes: LaneGeometry = LANES) -> Scenario:
    """Constant-speed FO, FT and BT around a one-lane (3.5 m) change to the left."""
    t_total = 10.0
    svs = {
        "fo": SvTrack.constant_velocity(40.0, 0.0, 18.0, 0.0, t_total),
        "ft": SvTrack.constant_velocity(30.0, 3.5, 21.0, 0.0, t_total),
        "bt": SvTrack.constant_velocity(-30.0, 3.5, 20.0, 0.0, t_total),
    }
    lcv = VehicleState(0.0, 0.0, 20.0, 0.0)
    return Scenario("standard", lcv, ControlInput(0.0, 0.0), (120.0, 3.5), svs, lanes, 2, t_total,
                    v_des=20.0, stage1=constant_velocity_stage1(lcv, svs))


def straight_scenario(lanes: LaneGeometry = LANES) -> Scenario:
    """No SVs; destination straight ahead in the current lane."""
    return Scenario("straight", VehicleState(0.0, 0.0, 20.0, 0.0), ControlInput(0.0, 0.0),
                    (150.0, 0.0), {}, lanes, 1, 10.0, v_des=20.0)
