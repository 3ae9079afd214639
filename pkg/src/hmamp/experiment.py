"""Run-level helpers shared by the command line and the demo scripts."""

from __future__ import annotations

import os

import numpy as np

from . import nn
from .config import ConfigError, write_snapshot
from .evaluation import evaluate_dppcp, evaluate_policy, write_episode_csv
from .metrics import write_report
from .motion import ReferenceSet, load_dataset
from .ppo import GaussianPolicy, Trainer
from .sim.env import write_trajectory_csv

__all__ = ["DatasetError", "load_reference", "make_trainer", "train", "save_run",
           "save_policy", "load_policy", "evaluate", "write_eval_outputs", "report_table"]

METHOD_LABELS = {"hmamp": "HMAMP", "rl-noamp": "RL-noAMP", "dppcp": "DPPCP"}


class DatasetError(ConfigError):
    pass


def load_reference(config, required=None):
    """Reference set from ``config.dataset``.

    Required for HMAMP; for the other methods a missing dataset yields
    ``None`` (Frechet distances are then reported as NaN).
    """
    required = config.method == "hmamp" if required is None else required
    try:
        clips = load_dataset(config.dataset)
    except FileNotFoundError as exc:
        if required:
            raise DatasetError(f"motion dataset {config.dataset!r} is required for "
                               f"method {config.method}: {exc}") from None
        return None
    return ReferenceSet.from_clips(clips, config.env)


def make_trainer(config, reference=None):
    if config.method == "dppcp":
        raise ConfigError("dppcp is a planned baseline and has nothing to train")
    return Trainer(config.env, config.training, config.rewards, config.discriminator, reference)


def train(config, reference=None, callback=None):
    trainer = make_trainer(config, reference)
    trainer.train(callback=callback)
    return trainer


def save_policy(path, policy, method, seed=0, step=0):
    extra = {"log_std": policy.log_std.tolist(), "action_scale": policy.action_scale,
             "method": method}
    return nn.save_checkpoint(path, policy.params, seed, step, extra)


def load_policy(path, config):
    """Rebuild a policy for ``config``; raises ValueError on a shape mismatch."""
    t = config.training
    policy = GaussianPolicy(config.env, t.policy_hidden, 0, t.init_std, t.action_scale)
    params, header = nn.load_checkpoint(path, policy.params.spec)
    policy.params = params
    policy.log_std = np.asarray(header.get("log_std", policy.log_std), dtype=np.float64)
    policy.action_scale = float(header.get("action_scale", t.action_scale))
    return policy, header


def save_run(trainer, config, out):
    """Config snapshot, training log and checkpoints of a finished run."""
    os.makedirs(out, exist_ok=True)
    write_snapshot(config, out)
    trainer.write_log(os.path.join(out, "training_log.csv"))
    seed = config.training.seed
    save_policy(os.path.join(out, "policy.ckpt"), trainer.policy, config.method, seed,
                trainer.episode)
    nn.save_checkpoint(os.path.join(out, "value.ckpt"), trainer.value, seed, trainer.episode)
    if trainer.amp:
        nn.save_checkpoint(os.path.join(out, "discriminator.ckpt"), trainer.discriminator.params,
                           seed, trainer.episode,
                           {"normalizer": trainer.discriminator.normalizer.state_dict(),
                            "updates": trainer.discriminator.updates})


def evaluate(config, policy=None, reference=None, episodes=None):
    """Noise-free evaluation of ``policy`` (or of DPPCP when ``policy`` is None)."""
    paths = [] if reference is None else reference.head_paths
    n = config.eval_episodes if episodes is None else episodes
    if policy is None:
        return evaluate_dppcp(config.env, n, config.eval_seed, paths, config.dppcp_duration)
    return evaluate_policy(policy, config.env, n, config.eval_seed, paths)


def report_table(results):
    """``{method: EvalResult}`` to the report's ``{label: {metric: mean}}``."""
    return {METHOD_LABELS.get(m, m): r.summary() for m, r in results.items()}


def write_eval_outputs(results, out, dt):
    """metrics.csv, report.txt, per-episode CSVs and trajectory logs."""
    os.makedirs(out, exist_ok=True)
    text = write_report(report_table(results), os.path.join(out, "metrics.csv"),
                        os.path.join(out, "report.txt"))
    for method, res in results.items():
        write_episode_csv(os.path.join(out, f"episodes_{method}.csv"), res)
        tdir = os.path.join(out, "trajectories", method)
        os.makedirs(tdir, exist_ok=True)
        for k, tr in enumerate(res.trajectories):
            write_trajectory_csv(os.path.join(tdir, f"episode_{k:03d}.csv"), tr.episode_log(dt))
    return text
