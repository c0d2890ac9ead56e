"""Planning scenarios: initial LCV state, destination, SV motion and lanes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError
from ..interaction_risk import FieldParams, FieldState
from ..trajectory_data import LaneGeometry
from ..vehicle_model import ControlInput, VehicleState

SV_ROLES = ("fo", "ft", "bt")


@dataclass
class SvTrack:
    """SV motion: sampled arrays (``t, x, y, vx, vy``) interpolated linearly.

    A constant-velocity SV is stored as a two-sample track; outside the
    sampled range the state is extrapolated at the end-point velocity.
    """
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "y", "vx", "vy"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.t.shape[0]
        if n < 1 or any(getattr(self, k).shape != (n,) for k in ("x", "y", "vx", "vy")):
            raise ConfigError("SV track arrays must be nonempty and equally long")
        if n > 1 and np.any(np.diff(self.t) <= 0):
            raise ConfigError("SV track times must be strictly increasing")

    @classmethod
    def constant_velocity(cls, x0, y0, vx, vy=0.0, t_end=1.0):
        return cls([0.0, t_end], [x0, x0 + vx * t_end], [y0, y0 + vy * t_end], [vx, vx], [vy, vy])

    def state_at(self, t):
        """``(x, y, vx, vy)`` at time ``t``."""
        t0, t1 = self.t[0], self.t[-1]
        if t < t0 or t > t1:
            i = 0 if t < t0 else -1
            dt = t - self.t[i]
            return (float(self.x[i] + self.vx[i] * dt), float(self.y[i] + self.vy[i] * dt),
                    float(self.vx[i]), float(self.vy[i]))
        return tuple(float(np.interp(t, self.t, a)) for a in (self.x, self.y, self.vx, self.vy))

    def future(self, t0, offsets, recorded=False):
        """States at ``t0 + offsets``; constant velocity from ``t0`` unless ``recorded``."""
        offsets = np.asarray(offsets, dtype=float)
        if recorded:
            return np.array([self.state_at(t0 + o) for o in offsets]).reshape(-1, 4)
        x, y, vx, vy = self.state_at(t0)
        return np.column_stack([x + vx * offsets, y + vy * offsets,
                                np.full_like(offsets, vx), np.full_like(offsets, vy)])

    def covers(self, t_start, t_end):
        return self.t[0] <= t_start + 1e-9 and self.t[-1] >= t_end - 1e-9

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("t", "x", "y", "vx", "vy")}

    @classmethod
    def from_dict(cls, d, t_end=1.0):
        if "t" in d:
            return cls(d["t"], d["x"], d["y"], d["vx"], d.get("vy", [0.0] * len(d["t"])))
        try:
            return cls.constant_velocity(float(d["x0"]), float(d["y0"]), float(d["vx"]),
                                         float(d.get("vy", 0.0)), t_end)
        except KeyError as exc:
            raise ConfigError(f"SV entry missing {exc.args[0]!r}") from None


@dataclass
class Scenario:
    name: str
    lcv: VehicleState
    control: ControlInput
    destination: tuple
    svs: dict  # role -> SvTrack
    lanes: LaneGeometry
    target_lane: int
    t_total: float
    v_des: Optional[float] = None
    field_params: FieldParams = field(default_factory=FieldParams)
    sv_future: str = "extrapolate"  # or "recorded"
    reference: Optional[dict] = None  # recorded/human LCV path: t, x, y, vx, vy
    stage1: Optional[dict] = None  # stage-1 factor values for weight prediction

    def __post_init__(self):
        if self.v_des is None:
            self.v_des = self.lcv.v
        self.destination = (float(self.destination[0]), float(self.destination[1]))
        self.validate()

    def validate(self):
        if not self.t_total > 0:
            raise ConfigError("t_total must be positive")
        if not self.v_des > 0:
            raise ConfigError("desired speed must be positive")
        if self.sv_future not in ("extrapolate", "recorded"):
            raise ConfigError(f"unknown sv_future mode {self.sv_future!r}")
        unknown = set(self.svs) - set(SV_ROLES)
        if unknown:
            raise ConfigError(f"unknown SV roles {sorted(unknown)}")
        self.lanes.center(self.target_lane)
        if self.lanes.lane_of(self.destination[1]) != int(self.target_lane):
            raise ConfigError("destination is not in the target lane")
        for role, track in self.svs.items():
            if track.t.shape[0] > 2 and not track.covers(0.0, self.t_total):
                raise ConfigError(f"{role} track does not cover [0, t_total]")

    @property
    def target_center(self):
        return self.lanes.center(self.target_lane)

    def sv_field_states(self, t):
        return [FieldState(*self.svs[r].state_at(t)[:3]) for r in SV_ROLES if r in self.svs]

    def sv_futures(self, t, offsets):
        """role -> ``(len(offsets), 4)`` array of future SV states."""
        rec = self.sv_future == "recorded"
        return {r: self.svs[r].future(t, offsets, rec) for r in SV_ROLES if r in self.svs}

    def to_dict(self):
        return {
            "name": self.name,
            "lcv": {"x": self.lcv.x, "y": self.lcv.y, "v": self.lcv.v, "phi": self.lcv.phi,
                    "a": self.control.a, "delta": self.control.delta},
            "destination": list(self.destination),
            "svs": {r: t.to_dict() for r, t in self.svs.items()},
            "lanes": self.lanes.to_dict(),
            "target_lane": int(self.target_lane),
            "t_total": self.t_total,
            "v_des": self.v_des,
            "field": self.field_params.to_dict(),
            "sv_future": self.sv_future,
            "reference": self.reference,
            "stage1": self.stage1,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            lcv = d["lcv"]
            t_total = float(d["t_total"])
            lanes = d["lanes"]
            geometry = LaneGeometry(
                centers=dict(zip((int(i) for i in lanes.get("lane_ids", range(1, len(lanes["lane_centers"]) + 1))),
                                 (float(c) for c in lanes["lane_centers"]))),
                width=float(lanes.get("lane_width", 3.5)))
            svs = {r: SvTrack.from_dict(s, t_total) for r, s in d.get("svs", {}).items()}
            return cls(
                name=str(d.get("name", "scenario")),
                lcv=VehicleState(float(lcv["x"]), float(lcv["y"]), float(lcv["v"]), float(lcv.get("phi", 0.0))),
                control=ControlInput(float(lcv.get("a", 0.0)), float(lcv.get("delta", 0.0))),
                destination=tuple(d["destination"]),
                svs=svs,
                lanes=geometry,
                target_lane=int(d["target_lane"]),
                t_total=t_total,
                v_des=d.get("v_des"),
                field_params=FieldParams(**d.get("field", {})),
                sv_future=d.get("sv_future", "extrapolate"),
                reference=d.get("reference"),
                stage1=d.get("stage1"),
            )
        except KeyError as exc:
            raise ConfigError(f"scenario missing {exc.args[0]!r}") from None
        except TypeError as exc:
            raise ConfigError(f"bad scenario field: {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
