"""Velocity consensus over the weighted neighborhood graph."""

from __future__ import annotations

import numpy as np


def consensus_control(own_velocity: float, neighbor_velocities,
                      neighbor_weights) -> float:
    """Weighted disagreement feedback -sum_j s_ij (v_i - v_j), per axis.

    Zero for an empty neighborhood and whenever all velocities agree.
    """
    v = np.asarray(neighbor_velocities, dtype=float)
    s = np.asarray(neighbor_weights, dtype=float)
    if v.shape != s.shape:
        raise ValueError("neighbor velocity and weight lists must match in length")
    if v.size == 0:
        return 0.0
    return float(-np.sum(s * (own_velocity - v)))
