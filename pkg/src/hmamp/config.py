"""Experiment configuration: every knob of a run in one JSON document."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace

from .discriminator import DiscriminatorConfig
from .ppo import TrainConfig
from .rewards import RewardWeights
from .sim.config import ConfigError, SimConfig

__all__ = ["METHODS", "ExperimentConfig", "load_config", "dumps", "write_snapshot"]

METHODS = ("hmamp", "rl-noamp", "dppcp")
SNAPSHOT_NAME = "config.json"


@dataclass(frozen=True)
class ExperimentConfig:
    env: SimConfig = field(default_factory=SimConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    training: TrainConfig = field(default_factory=TrainConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    dataset: str = "reference"
    output_dir: str = "runs/default"
    method: str = "hmamp"
    eval_episodes: int = 10
    eval_seed: int = 1000
    dppcp_duration: float = 0.5
    n_resample: int = 50

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if self.eval_episodes < 1 or self.n_resample < 2:
            raise ConfigError("eval_episodes must be >= 1 and n_resample >= 2")
        if self.dppcp_duration <= 0:
            raise ConfigError("dppcp_duration must be positive")

    def for_method(self, method):
        """Copy running ``method``; RL-noAMP also switches the style term off."""
        from .baselines import make_rl_noamp_config

        cfg = replace(self, method=method)
        if method == "rl-noamp":
            training, rewards = make_rl_noamp_config(self.training, self.rewards)
            cfg = replace(cfg, training=training, rewards=rewards)
        return cfg

    def to_dict(self):
        return {
            "env": self.env.to_dict(),
            "rewards": self.rewards.to_dict(),
            "training": self.training.to_dict(),
            "discriminator": self.discriminator.to_dict(),
            **{f.name: getattr(self, f.name) for f in fields(self)
               if f.name not in ("env", "rewards", "training", "discriminator")},
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        parts = {"env": SimConfig, "rewards": RewardWeights, "training": TrainConfig,
                 "discriminator": DiscriminatorConfig}
        for key, cls_ in parts.items():
            if key in d:
                sub = d[key]
                if not isinstance(sub, dict):
                    raise ConfigError(f"config section {key!r} must be an object")
                allowed = {f.name for f in fields(cls_)}
                bad = set(sub) - allowed
                if bad:
                    raise ConfigError(f"unknown keys in {key!r}: {sorted(bad)}")
                try:
                    d[key] = cls_.from_dict(sub)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"invalid {key!r} section: {exc}") from None
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def dumps(config):
    return json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path=None):
    """Defaults overlaid with the JSON file at ``path`` (if any)."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return ExperimentConfig.from_dict(data)


def write_snapshot(config, directory):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, SNAPSHOT_NAME)
    with open(path, "w") as fh:
        fh.write(dumps(config))
    return path
