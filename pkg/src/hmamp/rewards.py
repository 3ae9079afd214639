"""Goal, style and combined rewards.

    r      = alpha_g * r_goal + beta_s * r_style
    r_goal = omega_f * r_force + omega_d * r_dist
    r_force = min(|F| / F_d, 1) on the contact step, 0 otherwise
    r_dist  = 1 - tanh(|x_f - x_c|)
    r_style = max(0, 1 - gamma_d * (d - 1)^2)
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

__all__ = ["RewardWeights", "force_reward", "distance_reward", "goal_reward", "style_reward",
           "total_reward"]


@dataclass(frozen=True)
class RewardWeights:
    alpha_g: float = 0.6
    beta_s: float = 0.4
    gamma_d: float = 0.25
    omega_f: float = 1e5
    omega_d: float = 1.0
    w_gp: float = 1.0
    F_d: float = 100.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"reward weight {f.name} must be nonnegative")
        if self.F_d <= 0:
            raise ValueError("F_d must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def force_reward(force_norm, F_d):
    """Saturating contact-force term for a step with contact."""
    r = np.minimum(np.asarray(force_norm, dtype=np.float64) / F_d, 1.0)
    return float(r) if r.ndim == 0 else r


def distance_reward(x_f, x_c):
    d = np.linalg.norm(np.asarray(x_f, dtype=np.float64) - np.asarray(x_c, dtype=np.float64), axis=-1)
    # 1 - tanh(d) = 2 e^{-2d} / (1 + e^{-2d}); no cancellation, so it stays > 0 for large d
    e = np.exp(-2.0 * d)
    return 2.0 * e / (1.0 + e)


def goal_reward(contact, x_f, x_c, w):
    """Goal reward for one step; ``contact`` is a ContactEvent or None."""
    r_f = 0.0 if contact is None else float(force_reward(contact.force_norm, w.F_d))
    r_d = float(distance_reward(x_f, x_c))
    return w.omega_f * r_f + w.omega_d * r_d


def style_reward(d, w):
    d = np.asarray(d, dtype=np.float64)
    r = np.maximum(0.0, 1.0 - w.gamma_d * (d - 1.0) ** 2)
    return float(r) if r.ndim == 0 else r


def total_reward(r_g, r_s, w):
    return w.alpha_g * r_g + w.beta_s * r_s
