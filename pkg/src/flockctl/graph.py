"""Time-varying communication graph from inter-agent positions.

Edge weights come from a smooth compactly-supported bump applied to a
normalized smooth surrogate norm of the relative position, so that the
weight is 1 for coincident agents and exactly 0 at and beyond the
communication range r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConnectivityParams:
    """Inner threshold a, communication range r [m], surrogate-norm scale mu."""

    a: float = 1.0
    r: float = 3.5
    mu: float = 0.5

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not (0 < self.a < self.r):
            raise ValueError("need 0 < a < r")

    @property
    def h(self) -> float:
        """Normalized inner threshold in (0, 1)."""
        return _alpha_of_norm(self.a, self.mu) / _alpha_of_norm(self.r, self.mu)


def _alpha_of_norm(n, mu: float):
    return (np.sqrt(1.0 + mu * np.asarray(n) ** 2) - 1.0) / mu


def alpha_norm(v: np.ndarray, mu: float) -> float:
    """Smooth surrogate norm (sqrt(1 + mu*|v|^2) - 1) / mu, differentiable at 0."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    v = np.asarray(v, dtype=float)
    return float(_alpha_of_norm(np.linalg.norm(v), mu))


def pump(z: float, h: float) -> float:
    """Bump cutoff: 1 on [0, h), cosine rolloff on [h, 1), 0 from 1 on.

    z is the normalized distance argument, h the inner plateau edge.
    """
    if not (0.0 < h < 1.0):
        raise ValueError("h must lie in (0, 1)")
    if z < 0:
        raise ValueError("pump argument must be non-negative")
    if z < h:
        return 1.0
    if z < 1.0:
        return 0.5 * (1.0 + math.cos(math.pi * (z - h) / (1.0 - h)))
    return 0.0


def edge_weight(pos_i: np.ndarray, pos_j: np.ndarray,
                params: ConnectivityParams) -> float:
    """Connection strength in [0, 1]; exactly 0 at distance >= r."""
    num = alpha_norm(np.asarray(pos_i, dtype=float) - np.asarray(pos_j, dtype=float),
                     params.mu)
    den = _alpha_of_norm(params.r, params.mu)
    return pump(num / den, params.h)


def build_graph(positions: np.ndarray, alive: np.ndarray,
                params: ConnectivityParams) -> "GraphWeights":
    """Symmetric weight matrix over all agents; dead rows/columns are zero."""
    positions = np.asarray(positions, dtype=float)
    alive = np.asarray(alive, dtype=bool)
    m = len(positions)
    if m == 0 or not alive.any():
        raise ValueError("need at least one alive agent")
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    z = _alpha_of_norm(dist, params.mu) / _alpha_of_norm(params.r, params.mu)
    h = params.h
    w = np.zeros((m, m))
    plateau = z < h
    roll = (z >= h) & (z < 1.0)
    w[plateau] = 1.0
    w[roll] = 0.5 * (1.0 + np.cos(np.pi * (z[roll] - h) / (1.0 - h)))
    np.fill_diagonal(w, 0.0)
    mask = np.outer(alive, alive)
    w *= mask
    return GraphWeights(w)


def build_full_graph(alive: np.ndarray) -> "GraphWeights":
    """All-to-all unit weights among alive agents (fixed-topology baseline)."""
    alive = np.asarray(alive, dtype=bool)
    w = np.outer(alive, alive).astype(float)
    np.fill_diagonal(w, 0.0)
    return GraphWeights(w)


@dataclass
class GraphWeights:
    """Immutable snapshot of the weighted adjacency matrix."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        m, n = self.weights.shape
        if m != n:
            raise ValueError("weight matrix must be square")

    def neighbors(self, i: int) -> np.ndarray:
        """Indices j with a strictly positive edge weight to i."""
        return np.nonzero(self.weights[i] > 0.0)[0]

    @property
    def edge_count(self) -> int:
        """Number of undirected edges with positive weight."""
        return int(np.count_nonzero(np.triu(self.weights, k=1) > 0.0))

    @property
    def mean_weight(self) -> float:
        """Mean weight over positive edges (0.0 when there are none)."""
        upper = np.triu(self.weights, k=1)
        vals = upper[upper > 0.0]
        return float(vals.mean()) if vals.size else 0.0
