"""Flock metrics and delimited-text serialization.

The separation-error metric averages |distance - s| over *connected*
alive follower pairs only; pairs out of communication range do not
enter it. That definition is recorded in the run manifest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SEPARATION_METRIC_NOTE = (
    "separation_error averages |pairwise distance - s| over connected "
    "(edge weight > 0) alive follower pairs; 0 when no pair is connected")


@dataclass
class MetricsRow:
    step: int
    time: float
    epsilon_t: float
    tracking_std: float
    separation_error: float
    separation_std: float
    speed_mean: float
    speed_std: float
    edge_count: int
    mean_weight: float
    n_alive: int


def tracking_stats(positions: np.ndarray, leader_position: np.ndarray,
                   alive: np.ndarray, d_t: float) -> tuple[float, float]:
    """Mean alive-follower distance to the leader minus d_t, plus distance std.

    Returns (nan, nan) when no follower is alive (undefined-metric marker).
    """
    positions = np.asarray(positions, dtype=float)
    alive = np.asarray(alive, dtype=bool)
    if not alive.any():
        return float("nan"), float("nan")
    d = np.linalg.norm(positions[alive] - np.asarray(leader_position), axis=1)
    return float(d.mean() - d_t), float(d.std())


def tracking_error_metric(positions, leader_position, alive, d_t: float) -> float:
    """Average tracking error: mean distance to the leader minus d_t."""
    return tracking_stats(positions, leader_position, alive, d_t)[0]


def separation_error_stats(positions: np.ndarray, weights: np.ndarray,
                           s: float) -> tuple[float, float]:
    """Mean and std of |pairwise distance - s| over connected pairs.

    `positions` and `weights` cover alive followers only. No connected
    pair gives (0, 0).
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = len(positions)
    errs = []
    for i in range(n):
        for j in range(i + 1, n):
            if weights[i, j] > 0.0:
                errs.append(abs(float(np.linalg.norm(positions[i] - positions[j])) - s))
    if not errs:
        return 0.0, 0.0
    arr = np.asarray(errs)
    return float(arr.mean()), float(arr.std())


def separation_error_metric(positions, weights, s: float) -> float:
    """Average separation error over connected alive follower pairs."""
    return separation_error_stats(positions, weights, s)[0]


def speed_metric(velocities: np.ndarray, alive: np.ndarray) -> tuple[float, float]:
    """Mean and population std of alive-follower speed norms."""
    velocities = np.asarray(velocities, dtype=float)
    alive = np.asarray(alive, dtype=bool)
    if not alive.any():
        return float("nan"), float("nan")
    speeds = np.linalg.norm(velocities[alive], axis=1)
    return float(speeds.mean()), float(speeds.std())


# -- CSV / manifest writers ----------------------------------------------------

TRAJECTORY_HEADER = ("step,time,agent,alive,x,y,vx,vy,"
                     "ct_x,ct_y,cv_x,cv_y,cd_x,cd_y")
METRICS_HEADER = ("step,time,epsilon_t,tracking_std,separation_error,"
                  "separation_std,speed_mean,speed_std,edge_count,"
                  "mean_weight,n_alive")
WEIGHTS_HEADER = ("step,time,agent,axis,solver," +
                  ",".join(f"theta_{i}" for i in range(10)) +
                  ",target_w,bellman_residual,converged")


def _f(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(result, path: str | Path) -> None:
    lines = [TRAJECTORY_HEADER]
    for rec in result.records:
        for i in range(len(rec.positions)):
            lines.append(",".join([
                str(rec.step), _f(rec.time), str(i), str(int(rec.alive[i])),
                _f(rec.positions[i, 0]), _f(rec.positions[i, 1]),
                _f(rec.velocities[i, 0]), _f(rec.velocities[i, 1]),
                _f(rec.control_t[i, 0]), _f(rec.control_t[i, 1]),
                _f(rec.control_v[i, 0]), _f(rec.control_v[i, 1]),
                _f(rec.control_d[i, 0]), _f(rec.control_d[i, 1]),
            ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics_csv(result, path: str | Path) -> None:
    lines = [METRICS_HEADER]
    for m in result.metrics:
        lines.append(",".join([
            str(m.step), _f(m.time), _f(m.epsilon_t), _f(m.tracking_std),
            _f(m.separation_error), _f(m.separation_std),
            _f(m.speed_mean), _f(m.speed_std),
            str(m.edge_count), _f(m.mean_weight), str(m.n_alive),
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_weights_csv(result, path: str | Path) -> None:
    lines = [WEIGHTS_HEADER]
    for w in result.weights:
        lines.append(",".join(
            [str(w.step), _f(w.time), str(w.agent), str(w.axis), w.solver]
            + [_f(x) for x in w.theta]
            + [_f(w.target), _f(w.residual), str(int(w.converged))]))
    Path(path).write_text("\n".join(lines) + "\n")


def write_manifest(result, path: str | Path, extra: dict | None = None) -> None:
    from . import __version__

    manifest = {
        "package": "flockctl",
        "version": __version__,
        "numpy_version": np.__version__,
        "seed": result.scenario.rng_seed,
        "solver": result.scenario.solver,
        "elapsed_s": round(result.elapsed_s, 6),
        "events_applied": [[t, desc] for t, desc in result.events_applied],
        "separation_metric": SEPARATION_METRIC_NOTE,
        "scenario": result.scenario.to_dict(),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def write_run_outputs(result, out_dir: str | Path) -> dict[str, Path]:
    """Write the four standard artifacts; returns their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": out / "trajectory.csv",
        "metrics": out / "metrics.csv",
        "weights": out / "weights.csv",
        "manifest": out / "manifest.json",
    }
    write_trajectory_csv(result, paths["trajectory"])
    write_metrics_csv(result, paths["metrics"])
    write_weights_csv(result, paths["weights"])
    write_manifest(result, paths["manifest"])
    return paths
