"""Quadratic Q-function machinery shared by the PI and VI trackers.

The action value over (error window Z, scalar control c) is
0.5 * [Z; c]^T Psi [Z; c] with Psi a symmetric 4x4 matrix. Psi is
estimated through its 10 distinct entries theta, regressed online with
recursive least squares against quadratic features of (Z, c).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Upper-triangle (row-major) entry order shared by theta and the feature map.
THETA_INDEX = ((0, 0), (0, 1), (0, 2), (0, 3),
               (1, 1), (1, 2), (1, 3),
               (2, 2), (2, 3),
               (3, 3))

EPS_PD = 1e-8


class DegenerateCriticError(ValueError):
    """Raised when the control-control entry of Psi is not safely positive."""


@dataclass(frozen=True)
class UtilityParams:
    """Stage-cost weights: positive-definite J on the error window, K > 0 on control."""

    J: np.ndarray
    K: float

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", J)
        if J.shape != (3, 3):
            raise ValueError("J must be 3x3")
        if not np.allclose(J, J.T, atol=1e-12):
            raise ValueError("J must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0:
            raise ValueError("J must be positive definite")
        if not self.K > 0:
            raise ValueError("K must be positive")


def utility(Z: np.ndarray, c: float, params: UtilityParams) -> float:
    """Stage cost 0.5 * (Z^T J Z + K c^2)."""
    Z = np.asarray(Z, dtype=float)
    return 0.5 * float(Z @ params.J @ Z + params.K * c * c)


def feature_map(Z: np.ndarray, c: float) -> np.ndarray:
    """Quadratic feature vector of z = (Z1, Z2, Z3, c), matching theta's order.

    Squares carry a 1/2 so that feature_map(Z, c) . theta(Psi) equals
    0.5 * z^T Psi z exactly for symmetric Psi.
    """
    z1, z2, z3 = np.asarray(Z, dtype=float)
    z4 = float(c)
    return np.array([
        0.5 * z1 * z1, z1 * z2, z1 * z3, z1 * z4,
        0.5 * z2 * z2, z2 * z3, z2 * z4,
        0.5 * z3 * z3, z3 * z4,
        0.5 * z4 * z4,
    ])


def theta_to_psi(theta: np.ndarray) -> np.ndarray:
    """Unpack the 10-vector into the symmetric 4x4 matrix."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (10,):
        raise ValueError("theta must have 10 entries")
    psi = np.zeros((4, 4))
    for t, (i, j) in zip(theta, THETA_INDEX):
        psi[i, j] = t
        psi[j, i] = t
    return psi


def psi_to_theta(psi: np.ndarray) -> np.ndarray:
    """Pack the upper triangle of a symmetric 4x4 matrix into the 10-vector."""
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (4, 4):
        raise ValueError("psi must be 4x4")
    return np.array([psi[i, j] for i, j in THETA_INDEX])


@dataclass
class RlsState:
    """Recursive least-squares state: estimate theta, covariance P, last gain L."""

    theta: np.ndarray
    P: np.ndarray
    L: np.ndarray | None = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.P = np.asarray(self.P, dtype=float)
        if self.L is None:
            self.L = np.zeros_like(self.theta)

    @classmethod
    def initial(cls, theta0: np.ndarray, p0_scale: float) -> "RlsState":
        if not p0_scale > 0:
            raise ValueError("p0_scale must be positive")
        n = len(theta0)
        return cls(np.array(theta0, dtype=float), p0_scale * np.eye(n))


def rls_update(state: RlsState, phi: np.ndarray, target: float) -> RlsState:
    """One recursive least-squares step on the scalar equation phi . theta = target.

    No forgetting factor; P is re-symmetrized to suppress floating-point
    drift. A zero regressor leaves the state unchanged.
    """
    phi = np.asarray(phi, dtype=float)
    if not (np.all(np.isfinite(phi)) and np.isfinite(target)):
        raise ValueError("regressor and target must be finite")
    P = state.P
    Pphi = P @ phi
    denom = 1.0 + float(phi @ Pphi)
    L = Pphi / denom
    theta = state.theta + L * (target - float(phi @ state.theta))
    P_new = P - np.outer(L, Pphi)
    P_new = 0.5 * (P_new + P_new.T)
    return RlsState(theta, P_new, L)


def greedy_policy(psi: np.ndarray, Z: np.ndarray, eps_pd: float = EPS_PD) -> float:
    """Minimizing control -Psi_cc^{-1} Psi_cZ Z of the quadratic action value."""
    psi = np.asarray(psi, dtype=float)
    if psi[3, 3] <= eps_pd:
        raise DegenerateCriticError(
            f"Psi_cc={psi[3, 3]:.3e} is not safely positive")
    Z = np.asarray(Z, dtype=float)
    return float(-(psi[3, :3] @ Z) / psi[3, 3])


def policy_gain(psi: np.ndarray, eps_pd: float = EPS_PD) -> np.ndarray:
    """Row gain F with greedy control c = F . Z."""
    psi = np.asarray(psi, dtype=float)
    if psi[3, 3] <= eps_pd:
        raise DegenerateCriticError(
            f"Psi_cc={psi[3, 3]:.3e} is not safely positive")
    return -psi[3, :3] / psi[3, 3]
