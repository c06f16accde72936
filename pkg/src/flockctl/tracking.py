"""Online model-free tracking controllers, one per (agent, axis).

Both trackers regress a quadratic action value from observed error-window
transitions with recursive least squares and act greedily on it:

* PiTracker evaluates the currently applied policy along the trajectory
  (temporal-difference regressor on feature differences) and improves it
  at a fixed cadence, optionally replaying the evaluation window through
  the RLS recursions until the fit settles before each improvement.
* ViTracker fits the one-step backup against a periodically refreshed
  target weight vector and re-extracts the greedy policy every step.

Neither tracker ever sees plant dynamics: inputs are error windows and
the stage costs computed from them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .critic import (
    DegenerateCriticError,
    RlsState,
    UtilityParams,
    feature_map,
    greedy_policy,
    policy_gain,
    psi_to_theta,
    rls_update,
    theta_to_psi,
    utility,
)


def default_theta0(T: float, kp: float = 2.0, kd: float = 1.0) -> np.ndarray:
    """Critic weights whose greedy policy is a PD law on the error window.

    The induced control is -kp*e - kd*(e - e_prev)/T, a stabilizing
    starting policy for the per-axis double integrator. Policy iteration
    needs an admissible initial policy; the zero policy is not one.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    gain = np.array([-(kp + kd / T), kd / T, 0.0])
    psi = np.eye(4)
    psi[3, 3] = 1.0
    psi[3, :3] = -gain
    psi[:3, 3] = -gain
    return psi_to_theta(psi)


@dataclass(frozen=True)
class PiConfig:
    """Tuning knobs shared by the PI and VI trackers.

    replay_passes > 0 switches the PI tracker to phased evaluation: the
    samples gathered since the last improvement are re-run through the
    RLS recursions (covariance re-initialized each pass) until the fit
    stops improving, then the policy is improved and the covariance and
    sample window start fresh.
    """

    t_n: int = 400
    xi: float = 1e-4
    window: int = 10
    p0_scale: float = 100.0
    theta0: np.ndarray | None = None
    excitation_amplitude: float = 0.1
    excitation_decay: float = 0.999
    n_improve: int = 10
    n_target: int = 20
    replay_passes: int = 0
    replay_tol: float = 1e-12
    eps_pd: float = 1e-8
    control_cap: float | None = None
    pd_kp: float = 2.0
    pd_kd: float = 1.0
    gain_trust_region: float | None = None

    def __post_init__(self):
        if self.t_n < 1:
            raise ValueError("t_n must be at least 1")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if not self.p0_scale > 0:
            raise ValueError("p0_scale must be positive")
        if self.n_improve < 1 or self.n_target < 1:
            raise ValueError("improvement cadences must be at least 1")

    def resolve_theta0(self, T: float) -> np.ndarray:
        if self.theta0 is not None:
            theta0 = np.asarray(self.theta0, dtype=float)
            if theta0.shape != (10,):
                raise ValueError("theta0 must have 10 entries")
            return theta0.copy()
        return default_theta0(T, self.pd_kp, self.pd_kd)


@dataclass
class StepRecord:
    """Per-step tracker log line."""

    k: int
    theta: np.ndarray
    target: float
    residual: float
    converged: bool


def _replay(theta: np.ndarray, buf_phi: list, buf_w: list, p0_scale: float,
            max_passes: int, tol: float) -> np.ndarray:
    """Iterate RLS passes over a sample window until its residual settles."""
    if not buf_phi:
        return theta
    Phi = np.asarray(buf_phi)
    Wv = np.asarray(buf_w)
    res_prev = np.inf
    for _ in range(max_passes):
        state = RlsState.initial(theta, p0_scale)
        for phi, w in zip(Phi, Wv):
            state = rls_update(state, phi, w)
        theta = state.theta
        res = float(np.max(np.abs(Phi @ theta - Wv)))
        if res < tol or res > 0.999 * res_prev:
            break
        res_prev = res
    return theta


class _TrackerBase:
    """State shared by both solvers: RLS, policy, convergence window, dither."""

    solver = "pi"

    def __init__(self, params: UtilityParams, cfg: PiConfig, T: float,
                 rng: np.random.Generator | int | None = 0):
        self.params = params
        self.cfg = cfg
        self.T = T
        self.rng = rng if isinstance(rng, np.random.Generator) \
            else np.random.default_rng(rng)
        theta0 = cfg.resolve_theta0(T)
        self.rls = RlsState.initial(theta0, cfg.p0_scale)
        self.policy_psi = theta_to_psi(theta0)
        if self.policy_psi[3, 3] <= cfg.eps_pd:
            raise ValueError("theta0 must yield a positive control-control entry")
        self._gain0 = policy_gain(self.policy_psi, cfg.eps_pd).copy()
        self._gain0_norm = float(np.linalg.norm(self._gain0))
        self.history: deque = deque([theta0.copy()], maxlen=cfg.window + 2)
        self.iteration = 0
        self.exc_k = 0
        self.converged = False
        self.convergence_index: int | None = None
        self.degenerate_events = 0
        self.buf_phi: list = []
        self.buf_w: list = []
        self.last_pair: tuple[np.ndarray, float] | None = None
        self.last_record: StepRecord | None = None

    # -- policy & excitation ------------------------------------------------

    @property
    def theta(self) -> np.ndarray:
        return self.rls.theta

    def gain(self) -> np.ndarray:
        return policy_gain(self.policy_psi, self.cfg.eps_pd)

    def _dither(self) -> float:
        amp = self.cfg.excitation_amplitude * self.cfg.excitation_decay ** self.exc_k
        self.exc_k += 1
        return amp * float(self.rng.uniform(-1.0, 1.0))

    def _greedy(self, psi: np.ndarray, Z: np.ndarray) -> float:
        try:
            return greedy_policy(psi, Z, self.cfg.eps_pd)
        except DegenerateCriticError:
            self.degenerate_events += 1
            return 0.0

    def _issue_control(self, Z: np.ndarray) -> float:
        c = self._greedy(self.policy_psi, Z) + self._dither()
        cap = self.cfg.control_cap
        if cap is not None:
            c = float(np.clip(c, -cap, cap))
        self.last_pair = (np.array(Z, dtype=float), c)
        return c

    def _admissible(self, cand: np.ndarray) -> bool:
        """Gate a candidate policy: positive Psi_cc, optional gain trust region.

        The trust region bounds the candidate gain's distance from the
        initial gain (relative to its norm); it uses no plant knowledge.
        """
        if cand[3, 3] <= self.cfg.eps_pd:
            return False
        rho = self.cfg.gain_trust_region
        if rho is not None:
            gain = policy_gain(cand, self.cfg.eps_pd)
            dist = float(np.linalg.norm(gain - self._gain0))
            if dist > rho * self._gain0_norm:
                return False
        return True

    def begin(self, Z0: np.ndarray) -> float:
        """Issue the very first control and remember the (window, control) pair."""
        return self._issue_control(Z0)

    def set_applied_control(self, c: float):
        """Replace the cached applied control before the next update.

        Actuator saturation can trim the issued command; crediting the
        tracker with the acceleration the plant actually integrated keeps
        the regression consistent with the observed transition.
        """
        if self.last_pair is not None:
            self.last_pair = (self.last_pair[0], float(c))

    def refresh(self):
        """Stage-boundary reset: covariance back to P0, weights retained."""
        self.rls = RlsState.initial(self.rls.theta, self.cfg.p0_scale)
        self.history.clear()
        self.history.append(self.rls.theta.copy())
        self.buf_phi.clear()
        self.buf_w.clear()
        self.converged = False
        self.convergence_index = None
        self.exc_k = 0
        self.last_pair = None

    # -- shared update plumbing ---------------------------------------------

    def _applied_pair(self, Z_k: np.ndarray) -> tuple[np.ndarray, float]:
        """The control actually applied at Z_k (cached), or a fresh draw."""
        if self.last_pair is not None and np.array_equal(self.last_pair[0], Z_k):
            return self.last_pair
        Z_k = np.asarray(Z_k, dtype=float)
        return Z_k, self._greedy(self.policy_psi, Z_k) + self._dither()

    def _check_convergence(self):
        self.history.append(self.rls.theta.copy())
        if self.converged or self.iteration <= self.cfg.window:
            return
        if len(self.history) < self.cfg.window + 2:
            return
        h = list(self.history)
        diffs = [float(np.linalg.norm(h[m + 1] - h[m])) for m in range(len(h) - 1)]
        if max(diffs) <= self.cfg.xi:
            self.converged = True
            self.convergence_index = self.iteration


class PiTracker(_TrackerBase):
    """Online policy iteration on the Bellman difference regressor."""

    solver = "pi"

    def step_pair(self, Z_k: np.ndarray, Z_k1: np.ndarray,
                  update: bool = True) -> float:
        """Consume the observed transition (Z_k -> Z_k1), return the next control.

        Z_k1 must be the window that followed the control issued for Z_k.
        The regressor pairs the applied control with the current policy's
        greedy action at Z_k1; the control returned for Z_k1 is computed
        after any policy improvement. Callers pass update=False for
        transitions contaminated by actuator saturation, which would
        otherwise teach the critic that control has no authority.
        """
        Z_k = np.asarray(Z_k, dtype=float)
        Z_k1 = np.asarray(Z_k1, dtype=float)
        Z_k, c_k = self._applied_pair(Z_k)
        if update:
            c_next = self._greedy(self.policy_psi, Z_k1)
            phi = feature_map(Z_k, c_k) - feature_map(Z_k1, c_next)
            w = utility(Z_k, c_k, self.params)
            self.buf_phi.append(phi)
            self.buf_w.append(w)
            self.rls = rls_update(self.rls, phi, w)
            self.iteration += 1
            self._check_convergence()
            if self.iteration % self.cfg.n_improve == 0 or \
                    self.convergence_index == self.iteration:
                self._improve()
            residual = abs(float(phi @ self.rls.theta) - w)
            self.last_record = StepRecord(self.iteration, self.rls.theta.copy(),
                                          w, residual, self.converged)
        else:
            self.last_record = StepRecord(self.iteration, self.rls.theta.copy(),
                                          utility(Z_k, c_k, self.params),
                                          float("nan"), self.converged)
        return self._issue_control(Z_k1)

    def _improve(self):
        if self.cfg.replay_passes > 0:
            theta = _replay(self.rls.theta, self.buf_phi, self.buf_w,
                            self.cfg.p0_scale, self.cfg.replay_passes,
                            self.cfg.replay_tol)
            self.rls = RlsState(theta, self.rls.P, self.rls.L)
        cand = theta_to_psi(self.rls.theta)
        if self._admissible(cand):
            self.policy_psi = cand
            if self.cfg.replay_passes > 0:
                self.rls = RlsState.initial(self.rls.theta, self.cfg.p0_scale)
                self.buf_phi.clear()
                self.buf_w.clear()
        else:
            self.degenerate_events += 1


class ViTracker(_TrackerBase):
    """Value-iteration baseline: backup against frozen target weights."""

    solver = "vi"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.theta_prev = self.rls.theta.copy()

    def _applied_policy(self) -> np.ndarray:
        cand = theta_to_psi(self.rls.theta)
        if self._admissible(cand):
            return cand
        return self.policy_psi

    def _issue_control(self, Z: np.ndarray) -> float:
        # VI extracts the greedy policy from the live weights every step.
        self.policy_psi = self._applied_policy()
        return super()._issue_control(Z)

    def step_pair(self, Z_k: np.ndarray, Z_k1: np.ndarray,
                  update: bool = True) -> float:
        """Consume (Z_k -> Z_k1) with the frozen-target backup, return next control."""
        Z_k = np.asarray(Z_k, dtype=float)
        Z_k1 = np.asarray(Z_k1, dtype=float)
        Z_k, c_k = self._applied_pair(Z_k)
        if not update:
            self.last_record = StepRecord(self.iteration, self.rls.theta.copy(),
                                          utility(Z_k, c_k, self.params),
                                          float("nan"), self.converged)
            return self._issue_control(Z_k1)
        psi_prev = theta_to_psi(self.theta_prev)
        c_next = self._greedy(psi_prev, Z_k1)
        phi = feature_map(Z_k, c_k)
        w = utility(Z_k, c_k, self.params) + \
            float(feature_map(Z_k1, c_next) @ self.theta_prev)
        self.buf_phi.append(phi)
        self.buf_w.append(w)
        self.rls = rls_update(self.rls, phi, w)
        self.iteration += 1
        self._check_convergence()
        if self.iteration % self.cfg.n_target == 0:
            if self.cfg.replay_passes > 0:
                theta = _replay(self.rls.theta, self.buf_phi, self.buf_w,
                                self.cfg.p0_scale, self.cfg.replay_passes,
                                self.cfg.replay_tol)
                self.rls = RlsState.initial(theta, self.cfg.p0_scale)
                self.buf_phi.clear()
                self.buf_w.clear()
            self.theta_prev = self.rls.theta.copy()
        residual = abs(float(phi @ self.rls.theta) - w)
        self.last_record = StepRecord(self.iteration, self.rls.theta.copy(),
                                      w, residual, self.converged)
        return self._issue_control(Z_k1)


def pi_step(tracker: PiTracker, Z_k: np.ndarray, Z_k1: np.ndarray) -> float:
    """Functional form of PiTracker.step_pair (tracker is the mutable state)."""
    return tracker.step_pair(Z_k, Z_k1)


def vi_step(tracker: ViTracker, Z_k: np.ndarray, Z_k1: np.ndarray) -> float:
    """Functional form of ViTracker.step_pair."""
    return tracker.step_pair(Z_k, Z_k1)


@dataclass
class Algorithm1Result:
    """Outcome of a tracking-learning run."""

    psi: np.ndarray
    theta: np.ndarray
    converged: bool
    steps: int
    convergence_index: int | None


def run_algorithm1(plant, z0: np.ndarray, params: UtilityParams, cfg: PiConfig,
                   T: float = 0.05, seed: int | np.random.Generator = 0,
                   solver: str = "pi") -> Algorithm1Result:
    """Run the online tracking loop against a stepping closure.

    `plant(c)` applies the scalar control and returns the successor error
    window. The loop stops at weight convergence or after cfg.t_n steps,
    returning the best-so-far policy weights either way.
    """
    cls = {"pi": PiTracker, "vi": ViTracker}[solver]
    tracker = cls(params, cfg, T, seed)
    Z = np.asarray(z0, dtype=float)
    c = tracker.begin(Z)
    steps = 0
    for _ in range(cfg.t_n):
        Z_next = np.asarray(plant(c), dtype=float)
        c = tracker.step_pair(Z, Z_next)
        Z = Z_next
        steps += 1
        if tracker.converged:
            break
    return Algorithm1Result(tracker.policy_psi.copy(), tracker.theta.copy(),
                            tracker.converged, steps, tracker.convergence_index)
