"""Planar point-mass followers and a unicycle leader.

Followers are double integrators per axis; the leader is driven by
(linear speed, angular rate) commands. All step functions are pure:
they validate inputs, never mutate, and return new states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LEADER_ANGULAR_RATE_CAP = math.radians(150.0)


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.atan2(math.sin(a), math.cos(a))
    # atan2 maps pi to pi but -pi to -pi; normalize the closed end
    if w == -math.pi:
        w = math.pi
    return w


@dataclass(frozen=True)
class Limits:
    """Actuation caps: max speed [m/s] and max acceleration [m/s^2]."""

    v_max: float = 1.2
    a_max: float = 2.0

    def __post_init__(self):
        if not (self.v_max > 0 and self.a_max > 0):
            raise ValueError("v_max and a_max must be strictly positive")


@dataclass
class AgentState:
    """Position/velocity of one follower; dead agents never move again."""

    position: np.ndarray
    velocity: np.ndarray
    alive: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)
        if self.position.shape != (2,) or self.velocity.shape != (2,):
            raise ValueError("position and velocity must be length-2 vectors")
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("agent state must be finite")


@dataclass(frozen=True)
class ControlSignal:
    """Aggregate planar acceleration command [m/s^2]."""

    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float))
        if self.accel.shape != (2,):
            raise ValueError("accel must be a length-2 vector")


@dataclass
class LeaderState:
    """Leader pose: planar position plus heading in (-pi, pi]."""

    position: np.ndarray
    heading: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (2,):
            raise ValueError("position must be a length-2 vector")
        self.heading = wrap_angle(float(self.heading))


@dataclass(frozen=True)
class LeaderCommand:
    """One row of the leader schedule: speed [m/s], turn rate [rad/s], duration [s]."""

    linear_speed: float
    angular_rate: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("command duration must be positive")


def saturate_accel(accel: np.ndarray, a_max: float) -> np.ndarray:
    """Clamp each acceleration component to [-a_max, a_max]."""
    return np.clip(accel, -a_max, a_max)


def clamp_speed(velocity: np.ndarray, v_max: float) -> np.ndarray:
    """Scale the velocity down to norm v_max, preserving direction."""
    speed = float(np.linalg.norm(velocity))
    if speed > v_max:
        return velocity * (v_max / speed)
    return velocity


def step_agent(state: AgentState, control: ControlSignal, T: float,
               limits: Limits) -> AgentState:
    """Advance a follower one step of period T.

    The position integrates the current velocity; the velocity then
    integrates the componentwise-saturated acceleration and is finally
    norm-clamped to v_max. A dead agent is returned unchanged.
    """
    if not T > 0:
        raise ValueError("step period T must be positive")
    if not state.alive:
        return AgentState(state.position.copy(), state.velocity.copy(), alive=False)
    accel = np.asarray(control.accel, dtype=float)
    if not np.all(np.isfinite(accel)):
        raise ValueError("control signal must be finite")
    accel = saturate_accel(accel, limits.a_max)
    position = state.position + T * state.velocity
    velocity = clamp_speed(state.velocity + T * accel, limits.v_max)
    return AgentState(position, velocity, alive=True)


def step_leader(state: LeaderState, cmd: LeaderCommand, T: float) -> LeaderState:
    """Advance the leader one unicycle step; the turn rate is capped at +/-150 deg/s."""
    if not T > 0:
        raise ValueError("step period T must be positive")
    rate = float(np.clip(cmd.angular_rate, -LEADER_ANGULAR_RATE_CAP,
                         LEADER_ANGULAR_RATE_CAP))
    heading = wrap_angle(state.heading + T * rate)
    step = T * cmd.linear_speed * np.array([math.cos(heading), math.sin(heading)])
    return LeaderState(state.position + step, heading)


def leader_velocity(state: LeaderState, cmd: LeaderCommand) -> np.ndarray:
    """Instantaneous leader velocity vector implied by the active command."""
    return cmd.linear_speed * np.array([math.cos(state.heading),
                                        math.sin(state.heading)])


def make_error_window(initial_error: float, length: int = 3) -> np.ndarray:
    """A fresh error window holding `initial_error` at every lag."""
    return np.full(length, float(initial_error))


def update_error_window(Z: np.ndarray, new_error: float) -> np.ndarray:
    """Shift the window: newest sample first, oldest dropped."""
    Z = np.asarray(Z, dtype=float)
    out = np.empty_like(Z)
    out[0] = new_error
    out[1:] = Z[:-1]
    return out
