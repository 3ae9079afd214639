"""Comparison methods: a planned PD strike and PPO without the style term."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .sim.kinematics import IKError, chain_points, solve_ik, tool_angle

__all__ = ["PlanningError", "DppcpPlan", "plan_dppcp", "make_rl_noamp_config"]


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class DppcpPlan:
    """Joint targets for steps 1, 2, ... of an episode.

    ``targets[k]`` is sent at step ``k``; past the end the last row is held.
    ``head_path`` is the planned Cartesian path of the hammer head.
    """

    targets: np.ndarray  # (N, 3)
    head_path: np.ndarray  # (N + 1, 2), includes the start
    nail_pos: np.ndarray
    duration: float

    def target(self, step):
        return self.targets[min(step, len(self.targets) - 1)]


def plan_dppcp(config, nail_pos, duration=0.5, depth=0.02):
    """Straight-line hammer head path from the home pose to ``depth`` below
    the nail head, timed with a cubic ease-in/ease-out and converted to joint
    targets by IK at a fixed handle angle.

    Raises :class:`PlanningError` when the end point is out of reach.
    """
    if duration <= 0:
        raise PlanningError("plan duration must be positive")
    nail_pos = np.asarray(nail_pos, dtype=np.float64)
    home = np.array(config.home_q)
    start = chain_points(home, config)["head"]
    goal = nail_pos - np.array([0.0, depth])
    phi = float(tool_angle(home, config))
    n = max(1, int(round(duration / config.dt)))
    tau = np.arange(1, n + 1) / n
    s = 3 * tau**2 - 2 * tau**3
    path = start + s[:, None] * (goal - start)
    q = home.copy()
    targets = np.empty((n, 3))
    for k, p in enumerate(path):
        try:
            q = solve_ik([("head", p), ("angle", phi)], config, q)
        except IKError as exc:
            raise PlanningError(f"nail at {nail_pos.tolist()} is unreachable: {exc}") from None
        targets[k] = q
    end = chain_points(targets[-1], config)["head"]
    if np.linalg.norm(end - goal) > 1e-4:
        raise PlanningError(f"nail at {nail_pos.tolist()} is unreachable: IK residual "
                            f"{np.linalg.norm(end - goal):.2e} m")
    return DppcpPlan(targets, np.vstack([start, path]), nail_pos.copy(), float(duration))


def make_rl_noamp_config(train_config, weights):
    """Copies of the configs with the style term and discriminator switched off."""
    return replace(train_config, use_amp=False), replace(weights, beta_s=0.0)
