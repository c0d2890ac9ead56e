"""Trajectory ingestion, lane-change extraction and causal-factor vectors.

Positions ``x``/``y`` are vehicle centres. Stage windows are half-open frame
ranges: stage 1 ``[t1_start, t1_end)``, stage 2 ``[t1_end, t2_end)`` and
stage 3 ``[t2_end, t3_end)``, so the three partition a contiguous span.
"""
from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Mapping, Optional, Union

import numpy as np
import pandas as pd

from .config import as_float, as_float_list, read_kv
from .errors import (ConfigError, InconsistentSamplingInterval, InsufficientHistory,
                     MissingColumn, NoInsertionFound, NonMonotonicFrames, StageWindowEmpty,
                     VehicleNotFound)
from .factors import STAGE1_FACTORS, STAGE2_FACTORS, factors_for_stage

log = logging.getLogger(__name__)

COLUMNS = ("frame", "vehicle_id", "x", "y", "vx", "vy", "ax", "ay", "lane_id", "length", "width")
DEFAULT_FRAME_RATE = 5.0
ONSET_SPEED = 0.2  # m/s
ONSET_SUSTAIN = 0.4  # s
STAGE1_SECONDS = 2.0
STAGE3_SECONDS = 1.0
NEIGHBOR_RADIUS = 100.0  # m, longitudinal


@dataclass
class TrajectoryTable:
    """Records sorted by ``(vehicle_id, frame)`` sampled every ``dt`` seconds."""

    records: pd.DataFrame
    dt: float
    _by_vehicle: dict = field(default=None, init=False, repr=False, compare=False)
    _by_frame: dict = field(default=None, init=False, repr=False, compare=False)

    def __len__(self):
        return len(self.records)

    @property
    def vehicle_ids(self):
        return list(self.records["vehicle_id"].unique())

    def vehicle(self, vehicle_id) -> pd.DataFrame:
        """Rows of one vehicle indexed by frame."""
        if self._by_vehicle is None:
            self._by_vehicle = {vid: g.set_index("frame", drop=False)
                                for vid, g in self.records.groupby("vehicle_id", sort=False)}
        try:
            return self._by_vehicle[vehicle_id]
        except KeyError:
            raise VehicleNotFound(vehicle_id) from None

    def at_frame(self, frame) -> pd.DataFrame:
        if self._by_frame is None:
            self._by_frame = {f: g for f, g in self.records.groupby("frame", sort=False)}
        return self._by_frame.get(frame, self.records.iloc[0:0])

    def frames_for(self, seconds: float) -> int:
        return int(round(seconds / self.dt))


@dataclass(frozen=True)
class LaneGeometry:
    centers: dict  # lane_id -> lateral centre (m)
    width: float

    def center(self, lane_id) -> float:
        try:
            return self.centers[int(lane_id)]
        except KeyError:
            raise ConfigError(f"lane {lane_id} not in lane geometry") from None

    @property
    def y_min(self):
        return min(self.centers.values()) - self.width / 2

    @property
    def y_max(self):
        return max(self.centers.values()) + self.width / 2

    def lane_of(self, y: float) -> int:
        return min(self.centers, key=lambda k: abs(self.centers[k] - y))

    @classmethod
    def from_config(cls, cfg: Mapping[str, str]):
        centers = as_float_list(cfg, "lane_centers")
        if "lane_ids" in cfg:
            ids = [int(v) for v in cfg["lane_ids"].split(",") if v.strip()]
        else:
            ids = list(range(1, len(centers) + 1))
        if len(ids) != len(centers):
            raise ConfigError("lane_ids and lane_centers differ in length")
        width = as_float(cfg, "lane_width", 3.5)
        if width <= 0:
            raise ConfigError("lane_width must be positive")
        return cls(centers=dict(zip(ids, centers)), width=width)

    @classmethod
    def load(cls, path):
        return cls.from_config(read_kv(path))

    def to_dict(self):
        return {"lane_ids": list(self.centers), "lane_centers": list(self.centers.values()),
                "lane_width": self.width}


@dataclass(frozen=True)
class NeighborSet:
    fo: Optional[object] = None
    ft: Optional[object] = None
    bt: Optional[object] = None

    def items(self):
        return [("fo", self.fo), ("ft", self.ft), ("bt", self.bt)]

    def present(self):
        return [(role, vid) for role, vid in self.items() if vid is not None]


@dataclass
class StagedLaneChangeCase:
    lcv_id: object
    neighbors: NeighborSet
    t1_start: int
    t1_end: int
    t2_end: int
    t3_end: int
    original_lane: int
    target_lane: int
    stage1: dict = field(default_factory=dict)
    stage2: dict = field(default_factory=dict)
    risk: Optional[float] = None

    @property
    def case_id(self):
        return f"{self.lcv_id}@{self.t1_end}"

    def stage_frames(self, stage: int) -> range:
        bounds = {1: (self.t1_start, self.t1_end), 2: (self.t1_end, self.t2_end),
                  3: (self.t2_end, self.t3_end)}
        lo, hi = bounds[stage]
        return range(lo, hi)

    def to_dict(self):
        d = {
            "case_id": self.case_id,
            "lcv_id": _plain(self.lcv_id),
            "neighbors": {role: _plain(v) for role, v in self.neighbors.items()},
            "t1_start": self.t1_start, "t1_end": self.t1_end,
            "t2_end": self.t2_end, "t3_end": self.t3_end,
            "original_lane": self.original_lane, "target_lane": self.target_lane,
            "stage1": self.stage1, "stage2": self.stage2,
        }
        if self.risk is not None:
            d["Y"] = self.risk
        return d

    @classmethod
    def from_dict(cls, d):
        nb = d["neighbors"]
        return cls(
            lcv_id=d["lcv_id"],
            neighbors=NeighborSet(nb.get("fo"), nb.get("ft"), nb.get("bt")),
            t1_start=int(d["t1_start"]), t1_end=int(d["t1_end"]),
            t2_end=int(d["t2_end"]), t3_end=int(d["t3_end"]),
            original_lane=int(d["original_lane"]), target_lane=int(d["target_lane"]),
            stage1=dict(d.get("stage1", {})), stage2=dict(d.get("stage2", {})),
            risk=d.get("Y"),
        )


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


# ---------------------------------------------------------------- loading

def read_schema(path) -> dict:
    """Column remapping config: ``<schema column> = <source column>``."""
    cfg = read_kv(path)
    unknown = sorted(set(cfg) - set(COLUMNS) - {"time", "frame_rate"})
    if unknown:
        raise ConfigError(f"unknown schema keys: {unknown}")
    return cfg


def load_trajectories(source: Union[str, IO, bytes], schema: Optional[Mapping[str, str]] = None,
                      frame_rate: Optional[float] = None) -> TrajectoryTable:
    """Parse a trajectory CSV into a :class:`TrajectoryTable`.

    ``schema`` maps schema column names to source header names. If the file
    has a ``time`` column the sampling interval is inferred from it;
    otherwise ``frame_rate`` (or a ``frame_rate`` schema entry, default 5 Hz)
    sets it.
    """
    schema = dict(schema or {})
    if frame_rate is None:
        frame_rate = float(schema.pop("frame_rate", DEFAULT_FRAME_RATE))
    else:
        schema.pop("frame_rate", None)
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    raw = pd.read_csv(source, float_precision="round_trip")
    rename = {src: dst for dst, src in schema.items()}
    raw = raw.rename(columns=rename)
    for col in COLUMNS:
        if col not in raw.columns:
            raise MissingColumn(col)
    keep = list(COLUMNS) + (["time"] if "time" in raw.columns else [])
    df = raw[keep].copy()
    df["frame"] = df["frame"].astype(np.int64)
    df["lane_id"] = df["lane_id"].astype(np.int64)
    for col in ("x", "y", "vx", "vy", "ax", "ay", "length", "width"):
        df[col] = df[col].astype(np.float64)
    df = df.sort_values(["vehicle_id", "frame"], kind="mergesort").reset_index(drop=True)

    same = df["vehicle_id"].to_numpy()[1:] == df["vehicle_id"].to_numpy()[:-1]
    gaps = np.diff(df["frame"].to_numpy())[same]
    if np.any(gaps == 0):
        raise NonMonotonicFrames("duplicate frame for a vehicle")
    if np.any(gaps != 1):
        raise InconsistentSamplingInterval("frames of a vehicle are not contiguous")

    if "time" in df.columns:
        steps = np.diff(df["time"].to_numpy(dtype=float))[same]
        if steps.size == 0:
            dt = 1.0 / frame_rate
        else:
            dt = float(np.median(steps))
            if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * max(dt, 1.0):
                raise InconsistentSamplingInterval("time column is not uniformly spaced")
            # undo float noise from differencing, e.g. 0.20000000000000018 -> 1/5
            rate = round(1.0 / dt, 6)
            if abs(1.0 / rate - dt) <= 1e-9 * dt:
                dt = 1.0 / rate
    else:
        if frame_rate <= 0:
            raise ConfigError("frame_rate must be positive")
        dt = 1.0 / frame_rate
    return TrajectoryTable(df, dt)


def dump_trajectories(table: TrajectoryTable, stream: Optional[IO] = None) -> Optional[str]:
    """Write ``table`` as CSV (round-trips through :func:`load_trajectories`)."""
    out = table.records.copy()
    if "time" not in out.columns:
        out["time"] = out["frame"] * table.dt
    return out.to_csv(stream, index=False, lineterminator="\n")


# ---------------------------------------------------------- case extraction

def detect_lane_change_onset(table: TrajectoryTable, vehicle_id, threshold: float = ONSET_SPEED,
                             sustain: float = ONSET_SUSTAIN) -> Optional[int]:
    """First frame where ``|vy| > threshold`` holds for ``sustain`` seconds.

    Returns ``None`` when the vehicle never sustains lateral motion or is
    tracked for less than 3 s.
    """
    veh = table.vehicle(vehicle_id)
    if len(veh) * table.dt < 3.0 - 1e-9:
        return None
    k = max(1, table.frames_for(sustain))
    above = np.abs(veh["vy"].to_numpy()) > threshold
    if above.size < k:
        return None
    run = np.convolve(above.astype(int), np.ones(k, dtype=int), mode="valid") == k
    hits = np.flatnonzero(run)
    if hits.size == 0:
        return None
    return int(veh["frame"].iloc[hits[0]])


def identify_neighbors(table: TrajectoryTable, lcv_id, frame: int, original_lane: int,
                       target_lane: int, radius: float = NEIGHBOR_RADIUS) -> NeighborSet:
    """Nearest vehicles ahead in the original lane and ahead/behind in the target lane."""
    scene = table.at_frame(frame)
    me = scene[scene["vehicle_id"] == lcv_id]
    if me.empty:
        raise VehicleNotFound(f"{lcv_id} not present at frame {frame}")
    x0 = float(me["x"].iloc[0])
    others = scene[scene["vehicle_id"] != lcv_id]
    dx = others["x"].to_numpy() - x0
    lanes = others["lane_id"].to_numpy()
    ids = others["vehicle_id"].to_numpy()

    def nearest(mask):
        if not mask.any():
            return None
        cand = np.flatnonzero(mask)
        return _plain(ids[cand[np.argmin(np.abs(dx[cand]))]])

    near = np.abs(dx) <= radius
    return NeighborSet(
        fo=nearest(near & (lanes == original_lane) & (dx > 0)),
        ft=nearest(near & (lanes == target_lane) & (dx > 0)),
        bt=nearest(near & (lanes == target_lane) & (dx < 0)),
    )


def segment_stages(table: TrajectoryTable, vehicle_id, onset: int,
                   lanes: LaneGeometry) -> StagedLaneChangeCase:
    """Stage boundaries and neighbours for a lane change starting at ``onset``.

    Insertion is the first frame after onset where the LCV is in the target
    lane and its centre is within half its width of the target-lane centre.
    """
    veh = table.vehicle(vehicle_id)
    first, last = int(veh["frame"].iloc[0]), int(veh["frame"].iloc[-1])
    n1, n3 = table.frames_for(STAGE1_SECONDS), table.frames_for(STAGE3_SECONDS)
    if onset not in veh.index:
        raise InsufficientHistory(f"onset frame {onset} outside the track of {vehicle_id}")
    if onset - n1 < first:
        raise InsufficientHistory(f"need {n1} frames before onset {onset}, track starts at {first}")
    original = int(veh.at[onset, "lane_id"])
    after = veh.loc[onset:]
    lane = after["lane_id"].to_numpy()
    changed = np.flatnonzero(lane != original)
    if changed.size == 0:
        raise NoInsertionFound(f"{vehicle_id} never leaves lane {original}")
    target = int(lane[changed[0]])
    center = lanes.center(target)
    inside = (lane == target) & (np.abs(after["y"].to_numpy() - center) < after["width"].to_numpy() / 2)
    hits = np.flatnonzero(inside)
    if hits.size == 0:
        raise NoInsertionFound(f"{vehicle_id} never settles in lane {target}")
    insertion = int(after["frame"].iloc[hits[0]])
    if insertion + n3 > last + 1:
        raise InsufficientHistory(f"need {n3} frames after insertion {insertion}")
    neighbors = identify_neighbors(table, vehicle_id, onset, original, target)
    return StagedLaneChangeCase(
        lcv_id=_plain(vehicle_id), neighbors=neighbors,
        t1_start=onset - n1, t1_end=onset, t2_end=insertion, t3_end=insertion + n3,
        original_lane=original, target_lane=target,
    )


# ---------------------------------------------------------------- factors

def _window(table, vid, frames: range) -> Optional[pd.DataFrame]:
    if vid is None:
        return None
    rows = table.vehicle(vid)
    sel = rows.loc[rows.index.intersection(frames)]
    return sel if len(sel) else None


def _gap_x(a: pd.DataFrame, b: pd.DataFrame) -> Optional[float]:
    """Mean bumper-to-bumper longitudinal gap over frames where both exist."""
    common = a.index.intersection(b.index)
    if len(common) == 0:
        return None
    a, b = a.loc[common], b.loc[common]
    gap = np.abs(b["x"].to_numpy() - a["x"].to_numpy()) - 0.5 * (a["length"].to_numpy() + b["length"].to_numpy())
    return float(np.mean(np.maximum(gap, 0.0)))


def _gap_y(a: pd.DataFrame, b: pd.DataFrame) -> Optional[float]:
    common = a.index.intersection(b.index)
    if len(common) == 0:
        return None
    return float(np.mean(np.abs(b.loc[common, "y"].to_numpy() - a.loc[common, "y"].to_numpy())))


def compute_factors(case: StagedLaneChangeCase, table: TrajectoryTable, stage: int) -> dict:
    """Window means of the stage's factor signals; absent entries are ``None``."""
    names = factors_for_stage(stage)
    frames = case.stage_frames(stage)
    if len(frames) == 0:
        raise StageWindowEmpty(f"stage {stage} window of {case.case_id} is empty")
    win = {"lc": _window(table, case.lcv_id, frames)}
    if win["lc"] is None:
        raise StageWindowEmpty(f"LCV has no records in stage {stage}")
    for role, vid in case.neighbors.items():
        win[role] = _window(table, vid, frames)

    out: dict = {}
    s = str(stage)
    for name in names:
        parts = name[: -len(s)].split("_")
        if parts[0] == "d":
            a, b = parts[1], parts[2]
            axis = "y" if b.endswith("y") else "x"
            b = b.rstrip("xy")
            wa, wb = win.get(a), win.get(b)
            if wa is None or wb is None:
                out[name] = None
            else:
                out[name] = _gap_y(wa, wb) if axis == "y" else _gap_x(wa, wb)
        else:
            veh, sig = parts
            w = win.get(veh)
            out[name] = None if w is None else float(w[sig].mean())
    return out


def extract_cases(table: TrajectoryTable, lanes: LaneGeometry) -> tuple[list, list]:
    """Run onset detection, segmentation and factor extraction on every vehicle.

    Returns ``(cases, skipped)`` where ``skipped`` lists ``(vehicle_id, reason)``.
    """
    cases, skipped = [], []
    for vid in table.vehicle_ids:
        onset = detect_lane_change_onset(table, vid)
        if onset is None:
            continue
        try:
            case = segment_stages(table, vid, onset, lanes)
            case.stage1 = compute_factors(case, table, 1)
            case.stage2 = compute_factors(case, table, 2)
        except (InsufficientHistory, NoInsertionFound, StageWindowEmpty) as exc:
            skipped.append((_plain(vid), f"{type(exc).__name__}: {exc}"))
            continue
        cases.append(case)
    return cases, skipped


def save_cases(cases, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in cases], fh, indent=1)
        fh.write("\n")


def load_cases(path) -> list[StagedLaneChangeCase]:
    with open(path, encoding="utf-8") as fh:
        return [StagedLaneChangeCase.from_dict(d) for d in json.load(fh)]


def cases_to_frame(cases) -> pd.DataFrame:
    """One row per case: stage-1 and stage-2 factors plus ``Y`` (NaN when absent)."""
    rows = []
    for c in cases:
        row = {"case_id": c.case_id}
        row.update({k: (np.nan if c.stage1.get(k) is None else c.stage1[k]) for k in STAGE1_FACTORS})
        row.update({k: (np.nan if c.stage2.get(k) is None else c.stage2[k]) for k in STAGE2_FACTORS})
        row["Y"] = np.nan if c.risk is None else c.risk
        rows.append(row)
    cols = ["case_id", *STAGE1_FACTORS, *STAGE2_FACTORS, "Y"]
    return pd.DataFrame(rows, columns=cols)
