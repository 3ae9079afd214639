"""Noise-free evaluation of trained policies and of the planned baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .baselines import plan_dppcp
from .metrics import episode_metrics
from .motion import has_backswing
from .ppo import _KIND, Trajectory, _rollout
from .sim.env import BatchEnv, Termination
from .sim.kinematics import chain_points

__all__ = ["EvalResult", "evaluation_config", "evaluate_policy", "evaluate_dppcp",
           "EPISODE_COLUMNS", "write_episode_csv"]

EPISODE_COLUMNS = ("episode", "termination", "steps", "Knock Impulse", "Energy",
                   "Energy Efficiency", "Vertical Force Ratio", "Frechet Distance", "backswing")


def evaluation_config(config):
    return replace(config, observation_noise=False)


@dataclass
class EvalResult:
    trajectories: list
    rows: list  # per-episode metric dicts

    @property
    def success_rate(self):
        return float(np.mean([tr.kind is Termination.TASK_DONE for tr in self.trajectories]))

    @property
    def backswing_rate(self):
        return float(np.mean([r["backswing"] for r in self.rows]))

    def summary(self):
        """Mean of each metric over the episodes where it is defined."""
        out = {}
        for key in ("Knock Impulse", "Energy", "Energy Efficiency", "Vertical Force Ratio",
                    "Frechet Distance"):
            vals = np.array([r[key] for r in self.rows], dtype=np.float64)
            ok = np.isfinite(vals)
            out[key] = float(vals[ok].mean()) if ok.any() else float("nan")
        return out

    def median(self, key):
        return float(np.median([r[key] for r in self.rows]))


def _rows(trajs, dt, reference_paths):
    rows = []
    for k, tr in enumerate(trajs):
        row = episode_metrics(tr.episode_log(dt), reference_paths)
        row.update(episode=k, termination=tr.kind.value, steps=len(tr),
                   backswing=bool(has_backswing(tr.head_path[:, 1])))
        rows.append(row)
    return rows


def evaluate_policy(policy, sim_config, episodes=10, seed=0, reference_paths=()):
    """Run ``episodes`` episodes with the mean action and no observation noise."""
    cfg = evaluation_config(sim_config)
    env = BatchEnv(cfg, episodes, seed)
    trajs = _rollout(policy, env, np.random.default_rng(seed), deterministic=True)
    return EvalResult(trajs, _rows(trajs, cfg.dt, reference_paths))


def evaluate_dppcp(sim_config, episodes=10, seed=0, reference_paths=(), duration=0.5):
    """Execute a fresh straight-line plan per randomized reset."""
    cfg = evaluation_config(sim_config)
    env = BatchEnv(cfg, episodes, seed)
    env.reset()
    plans = [plan_dppcp(cfg, env.nail[i], duration) for i in range(episodes)]
    q_rec = [[env.q[i].copy()] for i in range(episodes)]
    qd_rec = [[env.qd[i].copy()] for i in range(episodes)]
    f_rec = [[] for _ in range(episodes)]
    t_rec = [[] for _ in range(episodes)]
    active = np.arange(episodes)
    t = 0
    while len(active):
        targets = np.array([plans[i].target(t) for i in active])
        out = env.step(active, targets)
        for row, i in enumerate(active):
            q_rec[i].append(env.q[i].copy())
            qd_rec[i].append(env.qd[i].copy())
            f_rec[i].append(out["force"][row])
            t_rec[i].append(out["torque"][row])
        active = active[out["kind"] == 0]
        t += 1
    trajs = []
    for i in range(episodes):
        q = np.array(q_rec[i])
        T = len(f_rec[i])
        trajs.append(Trajectory(
            obs=np.zeros((T, 0)), actions=np.array([plans[i].target(k) for k in range(T)]),
            log_probs=np.zeros(T), q_path=q, qdot_path=np.array(qd_rec[i]),
            head_path=chain_points(q, cfg)["head"], nail_pos=env.nail[i].copy(),
            force=np.array(f_rec[i]), torque=np.array(t_rec[i]), kind=_KIND[int(env.kind[i])],
            last_obs=np.zeros(0)))
    return EvalResult(trajs, _rows(trajs, cfg.dt, reference_paths))


def write_episode_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS)
        for r in result.rows:
            w.writerow([r["episode"], r["termination"], r["steps"],
                        *[repr(float(r[k])) for k in EPISODE_COLUMNS[3:8]], int(r["backswing"])])
