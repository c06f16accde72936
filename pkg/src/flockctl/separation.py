"""Zero-order Takagi-Sugeno separation control.

Each neighbor contributes a repulsive acceleration inferred from the
signed per-axis displacement through a small triangular rule base; the
contributions are averaged over the neighborhood. An optional online
consequence-adaptation hook strengthens repulsion after close approaches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_COVERAGE = 7.0  # twice the default communication range


@dataclass(frozen=True)
class FuzzyRuleBase:
    """Triangular memberships over displacement with constant consequences.

    The default base is odd: contribution(-d) = -contribution(d), with
    consequences oriented so that acceleration pushes the agent away from
    its neighbor (same sign as the displacement gamma_i - gamma_j).
    """

    centers: np.ndarray
    widths: np.ndarray
    consequences: np.ndarray
    adaptive: bool = False
    learning_rate: float = 0.05
    consequence_bound: float = 10.0
    normalize: bool = False

    def __post_init__(self):
        object.__setattr__(self, "centers", np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "widths", np.asarray(self.widths, dtype=float))
        object.__setattr__(self, "consequences",
                           np.asarray(self.consequences, dtype=float))
        n = len(self.centers)
        if len(self.widths) != n or len(self.consequences) != n:
            raise ValueError("centers, widths and consequences must match in length")
        if n == 0:
            raise ValueError("rule base must contain at least one rule")
        if np.any(self.widths <= 0):
            raise ValueError("membership widths must be positive")
        if not np.all(np.isfinite(self.consequences)):
            raise ValueError("consequences must be finite")

    def firing_strengths(self, displacement: float) -> np.ndarray:
        """Triangular memberships evaluated at the displacement."""
        return np.maximum(0.0, 1.0 - np.abs(displacement - self.centers) / self.widths)


def default_rule_base(s: float, eta0: float = 1.0,
                      coverage: float = DEFAULT_COVERAGE,
                      shoulder: float = 0.25,
                      adaptive: bool = False,
                      learning_rate: float = 0.05,
                      normalize: bool = False) -> FuzzyRuleBase:
    """Five antisymmetric rules centered at {-s, -s/2, 0, s/2, s}.

    Consequences share the sign of the displacement (pure repulsion): a
    collision wall of strength eta0 peaking at half the safety distance
    and a softer skin of strength shoulder*eta0 at s that settled
    neighbors rest against; nothing fires past 1.5 s, so distant
    flock-mates are undisturbed. Neighborhood averaging divides the field
    by the neighbor count, so eta0 is sized for the expected crowding.
    The wide zero-consequence rule keeps some rule firing out to
    `coverage`.
    """
    if not s > 0:
        raise ValueError("safety distance must be positive")
    centers = s * np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    widths = np.array([s / 2, s / 2, max(coverage, 1.5 * s), s / 2, s / 2])
    consequences = eta0 * np.array([-shoulder, -1.0, 0.0, 1.0, shoulder])
    return FuzzyRuleBase(centers, widths, consequences, adaptive=adaptive,
                         learning_rate=learning_rate,
                         consequence_bound=10.0 * max(eta0, 1.0),
                         normalize=normalize)


def rescale_rule_base(rules: FuzzyRuleBase, old_s: float, s: float) -> FuzzyRuleBase:
    """Re-center memberships after a safety-distance change."""
    if not (old_s > 0 and s > 0):
        raise ValueError("safety distances must be positive")
    ratio = s / old_s
    return replace(rules, centers=rules.centers * ratio,
                   widths=rules.widths * ratio)


def ts_infer(displacement: float, rules: FuzzyRuleBase) -> float:
    """Single-neighbor contribution: sum_f Theta_f(d) * eta_f.

    The sum is unnormalized by default, matching the aggregation law as
    printed; set rules.normalize for the weighted-average variant.
    """
    theta = rules.firing_strengths(displacement)
    num = float(theta @ rules.consequences)
    if rules.normalize:
        denom = float(theta.sum())
        return num / denom if denom > 0 else 0.0
    return num


def aggregate_separation(displacements, rules: FuzzyRuleBase) -> float:
    """Neighborhood average of per-neighbor contributions; 0 when alone."""
    displacements = np.asarray(displacements, dtype=float)
    if displacements.size == 0:
        return 0.0
    return float(np.mean([ts_infer(d, rules) for d in displacements]))


def proximity_reward(displacement: float, safety_s: float) -> float:
    """Penalty weight: 1 at overlap, decaying to 0 at the safety distance."""
    x = abs(displacement) / safety_s
    if x >= 1.0:
        return 0.0
    return (1.0 - x) ** 2


def adapt_consequences(rules: FuzzyRuleBase, displacement: float,
                       safety_s: float) -> FuzzyRuleBase:
    """Strengthen repulsive consequences after a close approach.

    Fired rules move outward (along the sign of their center) in
    proportion to the proximity penalty; consequences stay clamped.
    Displacements at or beyond the safety distance leave rules unchanged.
    """
    if not rules.adaptive:
        return rules
    reward = proximity_reward(displacement, safety_s)
    if reward == 0.0:
        return rules
    theta = rules.firing_strengths(displacement)
    push = np.sign(rules.centers)
    eta = rules.consequences + rules.learning_rate * theta * reward * push
    eta = np.clip(eta, -rules.consequence_bound, rules.consequence_bound)
    return replace(rules, consequences=eta)
