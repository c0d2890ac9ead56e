"""Potential field seen by the LCV: SV repulsion plus destination attraction."""
from __future__ import annotations

import numpy as np

from ..interaction_risk import FieldParams, FieldState, field_value

ATTRACTIVE_GAIN = 20.0


def repulsive_potential(svs, x, y, params: FieldParams = FieldParams()):
    """Sum of the SV fields at ``(x, y)``; ``svs`` is an iterable of :class:`FieldState`."""
    total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    for sv in svs:
        total = total + field_value(sv, x, y, params)
    return total if total.shape else float(total)


def attractive_potential(dest, x, y, gain=ATTRACTIVE_GAIN):
    dx = np.asarray(x, dtype=float) - dest[0]
    dy = np.asarray(y, dtype=float) - dest[1]
    return gain * np.hypot(dx, dy)


def total_potential(svs, dest, x, y, params: FieldParams = FieldParams(), gain=ATTRACTIVE_GAIN):
    return repulsive_potential(svs, x, y, params) + attractive_potential(dest, x, y, gain)


__all__ = ["FieldState", "attractive_potential", "repulsive_potential", "total_potential"]
