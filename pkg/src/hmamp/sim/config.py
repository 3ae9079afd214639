"""Physical and randomization parameters of the planar hammering task."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

__all__ = ["ConfigError", "SimConfig"]


class ConfigError(ValueError):
    """Raised for physically meaningless or inconsistent configurations."""


def _pair(v):
    return tuple(float(x) for x in v)


@dataclass(frozen=True)
class SimConfig:
    """Planar 3-link arm holding a hammer above a table with one nail.

    Frame: the base joint sits at the origin, +x points towards the nail,
    +y up, and the table surface is the line ``y = table_height``. All
    joint angles are relative; a zero vector stretches the arm along +x.

    The hammer handle is welded to the last link, rotated by
    ``hammer_mount_angle``; the head (function point) sits
    ``hammer_length`` along the handle from the grasp point, and the
    auxiliary point sits ``aux_offset`` beyond the head, perpendicular to
    the handle.
    """

    link_lengths: tuple = (0.3, 0.3, 0.15)
    link_masses: tuple = (1.0, 0.8, 0.4)
    hammer_length: float = 0.25
    hammer_head_mass: float = 0.5
    hammer_mount_angle: float = math.pi / 2
    aux_offset: float = 0.05
    table_height: float = -0.35
    # Nail head box ((x_lo, x_hi), (y_lo, y_hi)).
    nail_position_range: tuple = ((0.55, 0.70), (-0.32, -0.32))
    capture_radius: float = 0.03
    nail_stiffness: float = 330.0
    nail_damping: float = 5.0
    # Per-joint (Kp, Kd).
    base_pd_gains: tuple = ((300.0, 15.0), (200.0, 10.0), (60.0, 2.5))
    gravity: float = 9.81
    dt: float = 0.02
    substeps: int = 50
    max_steps: int = 152
    friction_range: tuple = (0.5, 1.25)
    pd_gain_scale_range: tuple = (0.9, 1.1)
    cartesian_noise: float = 0.01
    joint_noise: float = 0.02
    observation_noise: bool = True
    desired_force: float = 100.0
    # Gripper pointing straight down, handle level, head above the nail range.
    home_q: tuple = (1.034, -1.798, -0.807)
    joint_limits: tuple = ((-0.5, 2.8), (-2.8, 0.5), (-2.8, 2.8))
    self_collision_limit: float = 2.9

    def __post_init__(self):
        conv = {
            "link_lengths": _pair,
            "link_masses": _pair,
            "home_q": _pair,
            "friction_range": _pair,
            "pd_gain_scale_range": _pair,
            "nail_position_range": lambda v: tuple(_pair(p) for p in v),
            "base_pd_gains": lambda v: tuple(_pair(p) for p in v),
            "joint_limits": lambda v: tuple(_pair(p) for p in v),
        }
        for name, fn in conv.items():
            object.__setattr__(self, name, fn(getattr(self, name)))
        object.__setattr__(self, "substeps", int(self.substeps))
        object.__setattr__(self, "max_steps", int(self.max_steps))
        self.validate()

    def validate(self):
        if len(self.link_lengths) != 3 or len(self.link_masses) != 3:
            raise ConfigError("the arm has exactly three links")
        if min(self.link_lengths) <= 0 or self.hammer_length <= 0:
            raise ConfigError("link and hammer lengths must be positive")
        if min(self.link_masses) <= 0 or self.hammer_head_mass <= 0:
            raise ConfigError("link and hammer masses must be positive")
        if self.dt <= 0 or self.substeps < 1 or self.max_steps < 1:
            raise ConfigError("dt, substeps and max_steps must be positive")
        if len(self.base_pd_gains) != 3 or any(k < 0 or d < 0 for k, d in self.base_pd_gains):
            raise ConfigError("need three nonnegative (Kp, Kd) pairs")
        ranges = [self.friction_range, self.pd_gain_scale_range, *self.nail_position_range,
                  *self.joint_limits]
        for lo, hi in ranges:
            if lo > hi:
                raise ConfigError(f"empty range [{lo}, {hi}]")
        if self.capture_radius <= 0 or self.nail_stiffness < 0 or self.nail_damping < 0:
            raise ConfigError("contact parameters must be nonnegative (capture radius positive)")
        if self.cartesian_noise < 0 or self.joint_noise < 0:
            raise ConfigError("noise bounds must be nonnegative")
        if self.desired_force <= 0:
            raise ConfigError("desired force must be positive")
        if self.nail_position_range[1][0] <= self.table_height:
            raise ConfigError("nail head must stand above the table")

    @property
    def episode_duration(self):
        return self.dt * self.max_steps

    def to_dict(self):
        d = asdict(self)
        return {k: _listify(v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown env config keys: {sorted(unknown)}")
        return cls(**data)


def _listify(v):
    if isinstance(v, tuple):
        return [_listify(x) for x in v]
    return v
