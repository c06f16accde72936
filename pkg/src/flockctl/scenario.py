"""Declarative simulation configuration, YAML-backed.

The schema mirrors the Scenario fields one-to-one so that
parse -> serialize -> parse is a fixed point on the nested dict.
Agent ids are 0-based throughout; angles in the file are degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .agents import LeaderCommand, Limits
from .critic import UtilityParams
from .graph import ConnectivityParams
from .tracking import PiConfig

SCHEMA_VERSION = 1

_TIME_TOL = 1e-9


class ScenarioError(ValueError):
    """Configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class ScatterSpec:
    """Seeded uniform box behind the leader for initial follower positions.

    Draws are rejection-sampled to keep agents at least min_spacing apart.
    """

    depth: float = 4.0
    width: float = 8.0
    gap: float = 0.5
    min_spacing: float = 1.5
    min_bearing_deg: float = 15.0

    def __post_init__(self):
        if self.depth <= 0 or self.width <= 0 or self.gap < 0:
            raise ScenarioError("scatter box needs positive depth/width, gap >= 0")
        if self.min_spacing < 0:
            raise ScenarioError("min_spacing must be non-negative")


@dataclass(frozen=True)
class Event:
    """Timed scenario event: decommission agents or change the safety distance."""

    time: float
    kind: str
    agents: tuple[int, ...] = ()
    value: float | None = None

    def __post_init__(self):
        if self.kind not in ("decommission", "set_safety_distance"):
            raise ScenarioError(f"unknown event kind {self.kind!r}")
        if self.kind == "decommission" and not self.agents:
            raise ScenarioError("decommission event needs agent ids")
        if self.kind == "set_safety_distance":
            if self.value is None or self.value <= 0:
                raise ScenarioError("set_safety_distance needs a positive value")


@dataclass(frozen=True)
class SeparationSpec:
    """Separation rule-base settings; explicit rules override the default base."""

    eta0: float = 1.0
    shoulder: float = 0.25
    normalize: bool = False
    adaptive: bool = False
    learning_rate: float = 0.05
    rescale_with_s: bool = True
    centers: tuple[float, ...] | None = None
    widths: tuple[float, ...] | None = None
    consequences: tuple[float, ...] | None = None


@dataclass
class Scenario:
    """Everything a simulation run needs, resolved and validated."""

    m: int
    leader_index: int
    t_step: float
    duration: float
    rng_seed: int
    solver: str
    leader_position: tuple[float, float]
    leader_heading_deg: float
    leader_schedule: list[LeaderCommand]
    events: list[Event]
    safety_distance: float
    desired_proximity: float | None  # None: tracks the safety distance
    limits: Limits
    connectivity: ConnectivityParams
    utility: UtilityParams
    pi_config: PiConfig
    separation: SeparationSpec
    scatter: ScatterSpec
    initial_positions: list[tuple[float, float]] | None = None
    vi_full_graph: bool = False
    cap_control: bool = True
    s_ramp_rate: float | None = None  # m/s; None applies s changes immediately
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.m < 1:
            raise ScenarioError("agent count must be at least 1")
        if not (0 <= self.leader_index < self.m):
            raise ScenarioError("leader_index out of range")
        if self.t_step <= 0 or self.duration <= 0:
            raise ScenarioError("t_step and duration must be positive")
        steps = self.duration / self.t_step
        if abs(steps - round(steps)) > 1e-6:
            raise ScenarioError("duration must be an integer multiple of t_step")
        if self.solver not in ("pi", "vi"):
            raise ScenarioError("solver must be 'pi' or 'vi'")
        if not self.leader_schedule:
            raise ScenarioError("leader schedule must not be empty")
        total = sum(c.duration for c in self.leader_schedule)
        if total + _TIME_TOL < self.duration:
            raise ScenarioError("leader schedule does not cover the full duration")
        if self.safety_distance <= 0:
            raise ScenarioError("safety distance must be positive")
        if self.desired_proximity is not None and self.desired_proximity <= 0:
            raise ScenarioError("desired proximity must be positive")
        followers = [i for i in range(self.m) if i != self.leader_index]
        for ev in self.events:
            if not (0.0 <= ev.time <= self.duration):
                raise ScenarioError(f"event time {ev.time} outside [0, duration]")
            if ev.kind == "decommission":
                bad = [i for i in ev.agents if i not in followers]
                if bad:
                    raise ScenarioError(f"cannot decommission agents {bad}")
        if self.initial_positions is not None:
            if len(self.initial_positions) != self.m - 1:
                raise ScenarioError(
                    "initial_positions must list every follower exactly once")

    # -- derived views -------------------------------------------------------

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.t_step))

    @property
    def follower_ids(self) -> list[int]:
        return [i for i in range(self.m) if i != self.leader_index]

    def desired_proximity_at(self, s: float) -> float:
        """Active proximity target; follows the live safety distance by default."""
        return s if self.desired_proximity is None else self.desired_proximity

    def command_at(self, t: float) -> LeaderCommand:
        """The schedule row governing time t (last row holds to the end)."""
        acc = 0.0
        for cmd in self.leader_schedule:
            acc += cmd.duration
            if t < acc - _TIME_TOL:
                return cmd
        return self.leader_schedule[-1]

    def stage_boundaries(self) -> list[float]:
        """Interior times where a schedule row or an event takes effect."""
        times = set()
        acc = 0.0
        for cmd in self.leader_schedule[:-1]:
            acc += cmd.duration
            if _TIME_TOL < acc < self.duration - _TIME_TOL:
                times.add(round(acc, 9))
        for ev in self.events:
            if _TIME_TOL < ev.time < self.duration - _TIME_TOL:
                times.add(round(ev.time, 9))
        return sorted(times)

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "agents": {
                "count": self.m,
                "leader_index": self.leader_index,
                "leader_start": {
                    "position": [float(x) for x in self.leader_position],
                    "heading_deg": float(self.leader_heading_deg),
                },
                "initial_positions": (
                    None if self.initial_positions is None
                    else [[float(x), float(y)] for x, y in self.initial_positions]),
                "scatter": {
                    "depth": self.scatter.depth,
                    "width": self.scatter.width,
                    "gap": self.scatter.gap,
                    "min_spacing": self.scatter.min_spacing,
                    "min_bearing_deg": self.scatter.min_bearing_deg,
                },
            },
            "sim": {
                "t_step": self.t_step,
                "duration": self.duration,
                "rng_seed": self.rng_seed,
                "solver": self.solver,
                "vi_full_graph": self.vi_full_graph,
            },
            "leader_schedule": [
                {
                    "duration": c.duration,
                    "linear_speed": c.linear_speed,
                    "angular_rate_deg": math.degrees(c.angular_rate),
                }
                for c in self.leader_schedule
            ],
            "events": [
                {
                    "time": ev.time,
                    "kind": ev.kind,
                    **({"agents": list(ev.agents)} if ev.kind == "decommission"
                       else {"value": ev.value}),
                }
                for ev in self.events
            ],
            "flock": {
                "safety_distance": self.safety_distance,
                "desired_proximity": self.desired_proximity,
                "s_ramp_rate": self.s_ramp_rate,
            },
            "limits": {"v_max": self.limits.v_max, "a_max": self.limits.a_max},
            "connectivity": {
                "a": self.connectivity.a,
                "r": self.connectivity.r,
                "mu": self.connectivity.mu,
            },
            "utility": {
                "j_diag": [float(x) for x in np.diag(self.utility.J)],
                "k": self.utility.K,
            },
            "tracking": {
                "t_n": self.pi_config.t_n,
                "xi": self.pi_config.xi,
                "window": self.pi_config.window,
                "p0_scale": self.pi_config.p0_scale,
                "excitation_amplitude": self.pi_config.excitation_amplitude,
                "excitation_decay": self.pi_config.excitation_decay,
                "n_improve": self.pi_config.n_improve,
                "n_target": self.pi_config.n_target,
                "replay_passes": self.pi_config.replay_passes,
                "pd_kp": self.pi_config.pd_kp,
                "pd_kd": self.pi_config.pd_kd,
                "gain_trust_region": self.pi_config.gain_trust_region,
                "cap_control": self.cap_control,
            },
            "separation": {
                "eta0": self.separation.eta0,
                "shoulder": self.separation.shoulder,
                "rescale_with_s": self.separation.rescale_with_s,
                "normalize": self.separation.normalize,
                "adaptive": self.separation.adaptive,
                "learning_rate": self.separation.learning_rate,
                "rules": (
                    None if self.separation.centers is None else {
                        "centers": list(self.separation.centers),
                        "widths": list(self.separation.widths),
                        "consequences": list(self.separation.consequences),
                    }),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            version = d.get("schema_version")
            if version != SCHEMA_VERSION:
                raise ScenarioError(f"unsupported schema_version {version!r}")
            ag = d["agents"]
            sim = d["sim"]
            sched = [
                LeaderCommand(
                    linear_speed=float(row["linear_speed"]),
                    angular_rate=math.radians(float(row["angular_rate_deg"])),
                    duration=float(row["duration"]),
                )
                for row in d["leader_schedule"]
            ]
            events = []
            for row in d.get("events", []):
                if row["kind"] == "decommission":
                    events.append(Event(time=float(row["time"]), kind=row["kind"],
                                        agents=tuple(int(i) for i in row["agents"])))
                else:
                    events.append(Event(time=float(row["time"]), kind=row["kind"],
                                        value=float(row["value"])))
            flock = d["flock"]
            lim = d["limits"]
            conn = d["connectivity"]
            util = d["utility"]
            trk = d["tracking"]
            sep = d["separation"]
            rules = sep.get("rules")
            initial = ag.get("initial_positions")
            return cls(
                m=int(ag["count"]),
                leader_index=int(ag["leader_index"]),
                t_step=float(sim["t_step"]),
                duration=float(sim["duration"]),
                rng_seed=int(sim["rng_seed"]),
                solver=str(sim["solver"]),
                vi_full_graph=bool(sim.get("vi_full_graph", False)),
                leader_position=tuple(float(x) for x in ag["leader_start"]["position"]),
                leader_heading_deg=float(ag["leader_start"]["heading_deg"]),
                leader_schedule=sched,
                events=events,
                safety_distance=float(flock["safety_distance"]),
                desired_proximity=(None if flock.get("desired_proximity") is None
                                   else float(flock["desired_proximity"])),
                s_ramp_rate=(None if flock.get("s_ramp_rate") is None
                             else float(flock["s_ramp_rate"])),
                limits=Limits(v_max=float(lim["v_max"]), a_max=float(lim["a_max"])),
                connectivity=ConnectivityParams(
                    a=float(conn["a"]), r=float(conn["r"]), mu=float(conn["mu"])),
                utility=UtilityParams(
                    J=np.diag([float(x) for x in util["j_diag"]]),
                    K=float(util["k"])),
                pi_config=PiConfig(
                    t_n=int(trk.get("t_n", 400)),
                    xi=float(trk.get("xi", 1e-4)),
                    window=int(trk.get("window", 10)),
                    p0_scale=float(trk.get("p0_scale", 100.0)),
                    excitation_amplitude=float(trk.get("excitation_amplitude", 0.1)),
                    excitation_decay=float(trk.get("excitation_decay", 0.999)),
                    n_improve=int(trk.get("n_improve", 10)),
                    n_target=int(trk.get("n_target", 20)),
                    replay_passes=int(trk.get("replay_passes", 0)),
                    pd_kp=float(trk.get("pd_kp", 2.0)),
                    pd_kd=float(trk.get("pd_kd", 1.0)),
                    gain_trust_region=(
                        None if trk.get("gain_trust_region") is None
                        else float(trk["gain_trust_region"])),
                ),
                cap_control=bool(trk.get("cap_control", True)),
                separation=SeparationSpec(
                    eta0=float(sep.get("eta0", 1.0)),
                    shoulder=float(sep.get("shoulder", 0.25)),
                    rescale_with_s=bool(sep.get("rescale_with_s", True)),
                    normalize=bool(sep.get("normalize", False)),
                    adaptive=bool(sep.get("adaptive", False)),
                    learning_rate=float(sep.get("learning_rate", 0.05)),
                    centers=(None if rules is None
                             else tuple(float(x) for x in rules["centers"])),
                    widths=(None if rules is None
                            else tuple(float(x) for x in rules["widths"])),
                    consequences=(None if rules is None
                                  else tuple(float(x) for x in rules["consequences"])),
                ),
                scatter=ScatterSpec(
                    depth=float(ag["scatter"]["depth"]),
                    width=float(ag["scatter"]["width"]),
                    gap=float(ag["scatter"]["gap"]),
                    min_spacing=float(ag["scatter"].get("min_spacing", 1.5)),
                    min_bearing_deg=float(ag["scatter"].get("min_bearing_deg", 15.0)),
                ),
                initial_positions=(
                    None if initial is None
                    else [(float(x), float(y)) for x, y in initial]),
            )
        except ScenarioError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"invalid scenario: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must hold a mapping at top level")
    return Scenario.from_dict(data)


def save_scenario(scenario: Scenario, path: str | Path):
    with open(path, "w") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)
