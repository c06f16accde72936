"""Deterministic fixed-step simulation loop.

Per step, in order: due events fire, the communication graph is
snapshotted, every alive follower computes its three control signals
(tracking, velocity consensus, fuzzy separation) from that same
snapshot, the record is logged, all agents step synchronously, and the
trackers consume the new error windows. Identical scenario and seed
give bit-identical outputs.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    AgentState,
    ControlSignal,
    LeaderState,
    wrap_angle,
    leader_velocity,
    make_error_window,
    step_agent,
    step_leader,
    update_error_window,
)
from .consensus import consensus_control
from .critic import UtilityParams
from .graph import build_full_graph, build_graph
from .metrics import MetricsRow, separation_error_stats, speed_metric, tracking_stats
from .scenario import Scenario, ScenarioError
from .separation import (
    FuzzyRuleBase,
    adapt_consequences,
    aggregate_separation,
    default_rule_base,
    rescale_rule_base,
)
from .tracking import PiTracker, ViTracker


@dataclass
class StepRecord:
    """State snapshot plus control decomposition for one simulation step."""

    step: int
    time: float
    positions: np.ndarray          # (M, 2)
    velocities: np.ndarray         # (M, 2)
    alive: np.ndarray              # (M,) bool
    control_t: np.ndarray          # (M, 2), zero for leader/dead
    control_v: np.ndarray
    control_d: np.ndarray
    edge_count: int
    mean_weight: float
    safety_distance: float
    desired_proximity: float


@dataclass
class WeightsRecord:
    """Per-tracker log line for one step."""

    step: int
    time: float
    agent: int
    axis: int
    solver: str
    theta: np.ndarray
    target: float
    residual: float
    converged: bool


@dataclass
class SimResult:
    scenario: Scenario
    records: list[StepRecord]
    metrics: list[MetricsRow]
    weights: list[WeightsRecord]
    events_applied: list[tuple[float, str]]
    elapsed_s: float


def _scatter_positions(scenario: Scenario, rng: np.random.Generator) -> np.ndarray:
    """Uniform box of followers behind the leader, rotated with its heading.

    Rejection sampling keeps initial agents min_spacing apart and at
    distinct bearings from the leader (agents sharing a bearing funnel
    onto the same formation spot and end up stacked). After enough failed
    draws the constraints are dropped for the remaining agents.
    """
    n = scenario.m - 1
    sp = scenario.scatter
    heading = math.radians(scenario.leader_heading_deg)
    back = -np.array([math.cos(heading), math.sin(heading)])
    side = np.array([-back[1], back[0]])
    origin = np.asarray(scenario.leader_position, dtype=float)
    min_bearing = math.radians(sp.min_bearing_deg)
    placed: list[np.ndarray] = []
    bearings: list[float] = []
    attempts = 0
    while len(placed) < n:
        depth = rng.uniform(sp.gap, sp.gap + sp.depth)
        lateral = rng.uniform(-sp.width / 2, sp.width / 2)
        p = origin + depth * back + lateral * side
        rel = p - origin
        bearing = math.atan2(rel[1], rel[0])
        attempts += 1
        spacing_ok = all(np.linalg.norm(p - q) >= sp.min_spacing for q in placed)
        bearing_ok = all(
            abs(wrap_angle(bearing - b)) >= min_bearing for b in bearings)
        if (spacing_ok and bearing_ok) or attempts > 500 * n:
            placed.append(p)
            bearings.append(bearing)
    return np.asarray(placed)


class _World:
    """Mutable simulation state for one run."""

    def __init__(self, scenario: Scenario):
        self.sc = scenario
        seq = np.random.SeedSequence(scenario.rng_seed)
        n_children = 1 + 2 * scenario.m
        children = seq.spawn(n_children)
        self.rng = np.random.default_rng(children[0])

        tau = scenario.leader_index
        cmd0 = scenario.command_at(0.0)
        self.leader = LeaderState(np.asarray(scenario.leader_position, float),
                                  math.radians(scenario.leader_heading_deg))
        self.agents: list[AgentState | None] = [None] * scenario.m
        if scenario.initial_positions is not None:
            follower_pos = [np.asarray(p, float) for p in scenario.initial_positions]
        else:
            follower_pos = list(_scatter_positions(scenario, self.rng))
        it = iter(follower_pos)
        for i in range(scenario.m):
            if i == tau:
                continue
            self.agents[i] = AgentState(next(it), np.zeros(2))

        self.s = scenario.safety_distance
        self.s_target = scenario.safety_distance
        self.rules: dict[int, FuzzyRuleBase] = {}
        for i in scenario.follower_ids:
            self.rules[i] = self._make_rules(self.s)

        solver_cls = PiTracker if scenario.solver == "pi" else ViTracker
        cap = scenario.limits.a_max if scenario.cap_control else None
        cfg = scenario.pi_config
        if cap is not None and cfg.control_cap is None:
            from dataclasses import replace as _dc_replace
            cfg = _dc_replace(cfg, control_cap=cap)
        self.trackers: dict[tuple[int, int], PiTracker | ViTracker] = {}
        for i in scenario.follower_ids:
            for axis in (0, 1):
                child = children[1 + 2 * i + axis]
                self.trackers[(i, axis)] = solver_cls(
                    scenario.utility, cfg, scenario.t_step,
                    np.random.default_rng(child))

        self.windows: dict[tuple[int, int], np.ndarray] = {}
        self.pending_control: dict[tuple[int, int], float] = {}
        for i in scenario.follower_ids:
            for axis in (0, 1):
                err = self.agents[i].position[axis] - self.leader.position[axis]
                Z = make_error_window(err)
                self.windows[(i, axis)] = Z
                self.pending_control[(i, axis)] = self.trackers[(i, axis)].begin(Z)

        self.fired: set[int] = set()
        self.events_applied: list[tuple[float, str]] = []

    def _make_rules(self, s: float) -> FuzzyRuleBase:
        spec = self.sc.separation
        if spec.centers is not None:
            return FuzzyRuleBase(np.array(spec.centers), np.array(spec.widths),
                                 np.array(spec.consequences),
                                 adaptive=spec.adaptive,
                                 learning_rate=spec.learning_rate,
                                 normalize=spec.normalize)
        return default_rule_base(s, eta0=spec.eta0,
                                 coverage=2.0 * self.sc.connectivity.r,
                                 shoulder=spec.shoulder,
                                 adaptive=spec.adaptive,
                                 learning_rate=spec.learning_rate,
                                 normalize=spec.normalize)

    # -- aggregate state views ------------------------------------------------

    def positions(self) -> np.ndarray:
        out = np.zeros((self.sc.m, 2))
        for i in range(self.sc.m):
            if i == self.sc.leader_index:
                out[i] = self.leader.position
            else:
                out[i] = self.agents[i].position
        return out

    def velocities(self, cmd) -> np.ndarray:
        out = np.zeros((self.sc.m, 2))
        for i in range(self.sc.m):
            if i == self.sc.leader_index:
                out[i] = leader_velocity(self.leader, cmd)
            else:
                out[i] = self.agents[i].velocity
        return out

    def alive_mask(self) -> np.ndarray:
        mask = np.ones(self.sc.m, dtype=bool)
        for i in self.sc.follower_ids:
            mask[i] = self.agents[i].alive
        return mask

    # -- events ----------------------------------------------------------------

    def apply_event(self, event) -> None:
        if event.kind == "decommission":
            for i in event.agents:
                ag = self.agents[i]
                if ag.alive:
                    ag.alive = False
                    ag.velocity = np.zeros(2)
            self.events_applied.append((event.time, f"decommission {list(event.agents)}"))
        elif event.kind == "set_safety_distance":
            self.s_target = float(event.value)
            if self.sc.s_ramp_rate is None:
                self._set_s(self.s_target)
            self.events_applied.append(
                (event.time, f"set_safety_distance {self.s_target}"))
        else:  # pragma: no cover - scenario validation rejects unknown kinds
            raise ScenarioError(f"unknown event kind {event.kind!r}")

    def _set_s(self, new_s: float) -> None:
        old = self.s
        self.s = float(new_s)
        if self.sc.separation.rescale_with_s and old != self.s:
            for i, rules in self.rules.items():
                self.rules[i] = rescale_rule_base(rules, old, self.s)

    def ramp_s(self, dt: float) -> None:
        """Move the live safety distance toward its target at the ramp rate."""
        rate = self.sc.s_ramp_rate
        if rate is None or self.s == self.s_target:
            return
        step = rate * dt
        if abs(self.s_target - self.s) <= step:
            self._set_s(self.s_target)
        else:
            self._set_s(self.s + step * np.sign(self.s_target - self.s))

    def fire_due_events(self, t: float) -> None:
        for idx, ev in enumerate(self.sc.events):
            if idx not in self.fired and ev.time <= t + 1e-9:
                self.fired.add(idx)
                self.apply_event(ev)

    def refresh_trackers(self) -> None:
        for tracker in self.trackers.values():
            tracker.refresh()


def apply_event(world: _World, event) -> _World:
    """Apply one scenario event in place (idempotent for dead agents)."""
    world.apply_event(event)
    return world


def run(scenario: Scenario) -> SimResult:
    """Execute the scenario and return trajectory, metrics, and weight logs."""
    t_start = _time.perf_counter()
    world = _World(scenario)
    sc = scenario
    tau = sc.leader_index
    records: list[StepRecord] = []
    metrics: list[MetricsRow] = []
    weights: list[WeightsRecord] = []
    boundaries = sc.stage_boundaries()
    next_boundary = 0

    for k in range(sc.n_steps):
        t = k * sc.t_step

        # stage boundary: fresh covariance, excitation re-armed
        if next_boundary < len(boundaries) and \
                t >= boundaries[next_boundary] - 1e-9:
            world.refresh_trackers()
            next_boundary += 1

        world.fire_due_events(t)
        world.ramp_s(sc.t_step)

        cmd = sc.command_at(t)
        positions = world.positions()
        velocities = world.velocities(cmd)
        alive = world.alive_mask()
        if sc.vi_full_graph and sc.solver == "vi":
            graph = build_full_graph(alive)
        else:
            graph = build_graph(positions, alive, sc.connectivity)

        c_t = np.zeros((sc.m, 2))
        c_v = np.zeros((sc.m, 2))
        c_d = np.zeros((sc.m, 2))
        totals: dict[int, np.ndarray] = {}
        for i in sc.follower_ids:
            if not world.agents[i].alive:
                continue
            nbrs = graph.neighbors(i)
            wts = graph.weights[i, nbrs]
            for axis in (0, 1):
                c_t[i, axis] = world.pending_control[(i, axis)]
                c_v[i, axis] = consensus_control(
                    velocities[i, axis], velocities[nbrs, axis], wts)
                disp = positions[i, axis] - positions[nbrs, axis]
                c_d[i, axis] = aggregate_separation(disp, world.rules[i])
                if world.rules[i].adaptive:
                    for d in disp:
                        world.rules[i] = adapt_consequences(
                            world.rules[i], float(d), world.s)
            totals[i] = c_t[i] + c_v[i] + c_d[i]

        d_t = sc.desired_proximity_at(world.s)
        records.append(StepRecord(
            step=k, time=t,
            positions=positions, velocities=velocities, alive=alive,
            control_t=c_t.copy(), control_v=c_v.copy(), control_d=c_d.copy(),
            edge_count=graph.edge_count, mean_weight=graph.mean_weight,
            safety_distance=world.s, desired_proximity=d_t,
        ))

        follower_mask = alive.copy()
        follower_mask[tau] = False
        eps_t, dist_std = tracking_stats(positions, positions[tau],
                                         follower_mask, d_t)
        fids = [i for i in sc.follower_ids if alive[i]]
        sep_mean, sep_std = separation_error_stats(
            positions[fids], graph.weights[np.ix_(fids, fids)], world.s)
        spd_mean, spd_std = speed_metric(velocities[fids],
                                         np.ones(len(fids), dtype=bool))
        metrics.append(MetricsRow(
            step=k, time=t, epsilon_t=eps_t, tracking_std=dist_std,
            separation_error=sep_mean, separation_std=sep_std,
            speed_mean=spd_mean, speed_std=spd_std,
            edge_count=graph.edge_count, mean_weight=graph.mean_weight,
            n_alive=len(fids),
        ))

        # synchronous state update
        world.leader = step_leader(world.leader, cmd, sc.t_step)
        saturated: dict[int, bool] = {}
        for i in sc.follower_ids:
            ag = world.agents[i]
            if ag.alive:
                new_state = step_agent(
                    ag, ControlSignal(totals[i]), sc.t_step, sc.limits)
                unconstrained = ag.velocity + sc.t_step * totals[i]
                saturated[i] = not np.allclose(
                    new_state.velocity, unconstrained, atol=1e-12)
                world.agents[i] = new_state

        # trackers consume the new error windows; transitions where the
        # actuator clipped the command carry no usable authority information
        # and are excluded from the regression
        for i in sc.follower_ids:
            if not world.agents[i].alive:
                continue
            for axis in (0, 1):
                key = (i, axis)
                err = world.agents[i].position[axis] - world.leader.position[axis]
                Z_new = update_error_window(world.windows[key], err)
                tracker = world.trackers[key]
                world.pending_control[key] = tracker.step_pair(
                    world.windows[key], Z_new, update=not saturated[i])
                world.windows[key] = Z_new
                rec = tracker.last_record
                weights.append(WeightsRecord(
                    step=k, time=t, agent=i, axis=axis, solver=tracker.solver,
                    theta=rec.theta, target=rec.target,
                    residual=rec.residual, converged=rec.converged))

    elapsed = _time.perf_counter() - t_start
    return SimResult(scenario=sc, records=records, metrics=metrics,
                     weights=weights, events_applied=world.events_applied,
                     elapsed_s=elapsed)
