"""Evaluation metrics: knock impulse, energy, efficiency, vertical force
ratio and discrete Frechet distance, plus the comparison report."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "MetricError",
    "EpisodeLog",
    "knock_impulse",
    "energy",
    "efficiency",
    "vertical_force_ratio",
    "frechet_distance",
    "frechet_brute_force",
    "resample_by_arclength",
    "episode_metrics",
    "METRIC_ROWS",
    "METHOD_COLUMNS",
    "write_report",
    "format_report",
]


class MetricError(ValueError):
    """A metric is undefined for the given episode (e.g. no energy spent)."""


@dataclass
class EpisodeLog:
    """Samples at t = 0, dt, ..., T*dt of one episode.

    Row 0 is the reset state (no force, no torque); row t holds the force on
    the nail during step t, the mean torque of step t and the velocities
    reached at its end.
    """

    force: np.ndarray  # (T+1, 2) N
    torque: np.ndarray  # (T+1, 3) N*m
    qdot: np.ndarray  # (T+1, 3) rad/s
    ee_path: np.ndarray  # (T+1, 2) m, hammer head
    dt: float
    q: np.ndarray = None
    nail_pos: np.ndarray = None

    def __post_init__(self):
        n = len(self.force)
        for name in ("torque", "qdot", "ee_path"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"episode log field {name} is not aligned with force")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def _trapz(y, dt):
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        return 0.0
    return float(dt * (0.5 * y[0] + y[1:-1].sum() + 0.5 * y[-1]))


def knock_impulse(log):
    return _trapz(np.linalg.norm(log.force, axis=1), log.dt)


def energy(log):
    """Sum over joints of the integral of |tau_i * omega_i|."""
    power = np.abs(np.asarray(log.torque) * np.asarray(log.qdot))
    return float(sum(_trapz(power[:, i], log.dt) for i in range(power.shape[1])))


def efficiency(impulse, spent):
    if spent <= 0:
        raise MetricError("energy efficiency is undefined for zero energy")
    return impulse / spent


def vertical_force_ratio(log):
    total = _trapz(np.linalg.norm(log.force, axis=1), log.dt)
    if total <= 0:
        raise MetricError("vertical force ratio is undefined without contact force")
    return _trapz(np.abs(np.asarray(log.force)[:, 1]), log.dt) / total


@njit(cache=True)
def _dfd(dist):
    p, q = dist.shape
    ca = np.empty((p, q))
    ca[0, 0] = dist[0, 0]
    for i in range(1, p):
        ca[i, 0] = max(ca[i - 1, 0], dist[i, 0])
    for j in range(1, q):
        ca[0, j] = max(ca[0, j - 1], dist[0, j])
    for i in range(1, p):
        for j in range(1, q):
            ca[i, j] = max(min(ca[i - 1, j], ca[i, j - 1], ca[i - 1, j - 1]), dist[i, j])
    return ca[p - 1, q - 1]


def _pairwise(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def frechet_distance(a, b):
    """Discrete Frechet distance between two point sequences."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("Frechet distance needs two nonempty trajectories")
    return float(_dfd(_pairwise(a, b)))


def frechet_brute_force(a, b):
    """Minimum over every monotone coupling of the largest paired distance.

    Walks all lattice paths from (0, 0) to (p-1, q-1) with steps (1, 0),
    (0, 1), (1, 1) without pruning. Exponential; only for checking.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("Frechet distance needs two nonempty trajectories")
    d = _pairwise(a, b).tolist()
    p, q = len(d), len(d[0])
    best = float("inf")
    stack = [(0, 0, d[0][0])]
    while stack:
        i, j, worst = stack.pop()
        if i == p - 1 and j == q - 1:
            best = min(best, worst)
            continue
        if i + 1 < p:
            stack.append((i + 1, j, max(worst, d[i + 1][j])))
        if j + 1 < q:
            stack.append((i, j + 1, max(worst, d[i][j + 1])))
        if i + 1 < p and j + 1 < q:
            stack.append((i + 1, j + 1, max(worst, d[i + 1][j + 1])))
    return best


def resample_by_arclength(path, n=50):
    """``n`` points equally spaced along the polyline ``path``."""
    path = np.atleast_2d(np.asarray(path, dtype=np.float64))
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return np.repeat(path[:1], n, axis=0)
    keep = np.concatenate([[True], seg > 0])
    s, path = s[keep], path[keep]
    grid = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(grid, s, path[:, k]) for k in range(path.shape[1])])


METRIC_ROWS = ("Knock Impulse", "Energy Efficiency", "Vertical Force Ratio", "Frechet Distance")
METHOD_COLUMNS = ("HMAMP", "DPPCP", "RL-noAMP")
_UNITS = {"Knock Impulse": "N*s", "Energy Efficiency": "s/m", "Vertical Force Ratio": "",
          "Frechet Distance": "m"}


def episode_metrics(log, reference_paths=(), n_resample=50):
    """All four metrics for one episode (NaN where undefined).

    The Frechet distance compares the arc-length resampled hammer head path
    with each reference path and keeps the closest one.
    """
    impulse = knock_impulse(log)
    spent = energy(log)
    try:
        eta = efficiency(impulse, spent)
    except MetricError:
        eta = float("nan")
    try:
        ratio = vertical_force_ratio(log)
    except MetricError:
        ratio = float("nan")
    fd = float("nan")
    if len(reference_paths):
        path = resample_by_arclength(log.ee_path, n_resample)
        fd = min(frechet_distance(path, resample_by_arclength(r, n_resample)) for r in reference_paths)
    return {"Knock Impulse": impulse, "Energy": spent, "Energy Efficiency": eta,
            "Vertical Force Ratio": ratio, "Frechet Distance": fd}


def _methods(table):
    return [m for m in METHOD_COLUMNS if m in table] + [m for m in table if m not in METHOD_COLUMNS]


def format_report(table):
    """Aligned text table; ``table[method][metric]`` holds the averages."""
    methods = _methods(table)
    labels = [f"{r} [{_UNITS[r]}]" if _UNITS[r] else r for r in METRIC_ROWS]
    width = max(len(x) for x in labels) + 2
    lines = ["Method".ljust(width) + "".join(m.rjust(14) for m in methods)]
    for row, label in zip(METRIC_ROWS, labels):
        cells = "".join(f"{table[m].get(row, float('nan')):.4g}".rjust(14) for m in methods)
        lines.append(label.ljust(width) + cells)
    return "\n".join(lines) + "\n"


def write_report(table, csv_path=None, txt_path=None):
    methods = _methods(table)
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", *methods])
            for row in METRIC_ROWS:
                w.writerow([row, *[repr(float(table[m].get(row, float("nan")))) for m in methods]])
    text = format_report(table)
    if txt_path is not None:
        with open(txt_path, "w") as fh:
            fh.write(text)
    return text
