"""Kinematic bicycle model about the rear axle, Euler-discretised.

State ``s = [x, y, v, phi]``, input ``u = [a, delta]``:

    x' = v cos(phi),  y' = v sin(phi),  v' = a,  phi' = v tan(delta) / L
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SteeringSingularity

WHEELBASE = 2.7  # m
_DELTA_LIMIT = math.pi / 2 - 1e-6


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    v: float
    phi: float

    def as_array(self):
        return np.array([self.x, self.y, self.v, self.phi])

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @property
    def vy(self):
        return self.v * math.sin(self.phi)

    @property
    def vx(self):
        return self.v * math.cos(self.phi)


@dataclass(frozen=True)
class ControlInput:
    a: float
    delta: float

    def as_array(self):
        return np.array([self.a, self.delta])

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]))


@dataclass(frozen=True)
class LinearizedDynamics:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    dt: float

    def apply(self, s, u):
        return self.A @ np.asarray(s, dtype=float) + self.B @ np.asarray(u, dtype=float) + self.C

    def to_dict(self):
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(), "dt": self.dt}


def _check_steering(delta):
    if not abs(delta) < _DELTA_LIMIT:
        raise SteeringSingularity(f"|delta| = {abs(delta):.6g} too close to pi/2")


def derivative(s, u, wheelbase=WHEELBASE):
    x, y, v, phi = np.asarray(s, dtype=float)
    a, delta = np.asarray(u, dtype=float)
    _check_steering(delta)
    if wheelbase <= 0:
        raise ValueError("wheelbase must be positive")
    return np.array([v * math.cos(phi), v * math.sin(phi), a, v * math.tan(delta) / wheelbase])


def step(s, u, dt, wheelbase=WHEELBASE):
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    s = np.asarray(s, dtype=float)
    return s + derivative(s, u, wheelbase) * dt


def linearize(s, u, dt, wheelbase=WHEELBASE) -> LinearizedDynamics:
    """First-order expansion of :func:`step` about ``(s, u)``.

    ``C`` is the defect ``step(s, u) - A s - B u``, so the affine model is
    exact at the expansion point.
    """
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    _, _, v, phi = s
    _, delta = u
    _check_steering(delta)
    c, sn = math.cos(phi), math.sin(phi)
    A = np.array([
        [1.0, 0.0, c * dt, -v * sn * dt],
        [0.0, 1.0, sn * dt, v * c * dt],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, math.tan(delta) / wheelbase * dt, 1.0],
    ])
    B = np.array([
        [0.0, 0.0],
        [0.0, 0.0],
        [dt, 0.0],
        [0.0, v / (wheelbase * math.cos(delta) ** 2) * dt],
    ])
    C = step(s, u, dt, wheelbase) - A @ s - B @ u
    return LinearizedDynamics(A, B, C, dt)


def simulate(s0, controls, dt, wheelbase=WHEELBASE):
    """Roll :func:`step` forward; returns an ``(N+1, 4)`` state array."""
    out = [np.asarray(s0, dtype=float)]
    for u in controls:
        out.append(step(out[-1], u, dt, wheelbase))
    return np.array(out)
