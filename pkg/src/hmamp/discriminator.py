"""Least-squares motion discriminator with a gradient penalty on real samples.

    loss = E_real[(D - 1)^2] + E_fake[(D + 1)^2] + w_gp / 2 * E_real[||grad D||^2]

The penalty differentiates w.r.t. the (normalized) transition features by
default; ``penalty="params"`` switches to the parameter-gradient variant.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import nn
from .motion import FEATURE_DIM, RunningMeanStd

__all__ = ["DiscriminatorConfig", "Discriminator", "predict", "disc_loss_and_grads", "update"]


@dataclass(frozen=True)
class DiscriminatorConfig:
    hidden: tuple = (256, 128)
    w_gp: float = 1.0
    lr: float = 1e-4
    batch_size: int = 256
    penalty: str = "input"  # or "params"
    normalize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.batch_size < 1:
            raise ValueError("discriminator batch size must be at least 1")
        if self.w_gp < 0:
            raise ValueError("w_gp must be nonnegative")
        if self.penalty not in ("input", "params"):
            raise ValueError(f"unknown penalty mode {self.penalty!r}")

    def spec(self, in_dim=FEATURE_DIM):
        return nn.MlpSpec((in_dim, *self.hidden, 1))

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def predict(params, x):
    """Raw discriminator scores for a batch of (already normalized) features."""
    out = nn.forward(params, np.atleast_2d(x))
    return out[:, 0]


def disc_loss_and_grads(params, real, fake, w_gp=1.0, penalty="input"):
    """Loss and parameter gradient on one real and one fake batch.

    Returns ``(loss, grad, info)``; ``info`` holds the individual terms and
    mean scores.
    """
    real = np.atleast_2d(np.asarray(real, dtype=np.float64))
    fake = np.atleast_2d(np.asarray(fake, dtype=np.float64))
    if len(real) == 0 or len(fake) == 0:
        raise ValueError("discriminator batches must be nonempty")
    nr, nf = len(real), len(fake)
    d_real, fc_real = nn.forward(params, real, cache=True)
    d_fake, fc_fake = nn.forward(params, fake, cache=True)
    loss_real = np.mean((d_real[:, 0] - 1.0) ** 2)
    loss_fake = np.mean((d_fake[:, 0] + 1.0) ** 2)
    grad = nn.backward_params(fc_real, 2.0 * (d_real - 1.0) / nr).flat
    grad = grad + nn.backward_params(fc_fake, 2.0 * (d_fake + 1.0) / nf).flat
    gp = 0.0
    if w_gp > 0:
        weights = np.full(nr, 0.5 * w_gp / nr)
        if penalty == "input":
            pen, pgrad = nn.grad_penalty_backward(params, real, weights)
        else:
            pen, pgrad = nn.param_grad_norm_penalty(params, real, weights)
        gp = float(np.mean(pen))
        grad = grad + pgrad.flat
    loss = loss_real + loss_fake + 0.5 * w_gp * gp
    info = {"loss": float(loss), "loss_real": float(loss_real), "loss_fake": float(loss_fake),
            "grad_penalty": gp, "mean_d_real": float(d_real.mean()),
            "mean_d_fake": float(d_fake.mean())}
    return float(loss), nn.ParamVector(params.spec, grad), info


def update(params, config, real, fake, optimizer):
    """One Adam step on the discriminator loss; returns (new params, info)."""
    _, grad, info = disc_loss_and_grads(params, real, fake, config.w_gp, config.penalty)
    new = params.copy()
    optimizer.step(new.flat, grad.flat)
    return new, info


class Discriminator:
    """Parameters, optimizer state and the shared feature normalizer."""

    def __init__(self, config=DiscriminatorConfig(), seed=0, in_dim=FEATURE_DIM):
        self.config = config
        self.params = nn.init_params(config.spec(in_dim), seed)
        self.optimizer = nn.Adam(self.params.spec.n_params, lr=config.lr)
        self.normalizer = RunningMeanStd(in_dim)
        self.updates = 0

    def _norm(self, x):
        return self.normalizer.normalize(x) if self.config.normalize else np.asarray(x)

    def score(self, features):
        """Scores for raw transition features."""
        features = np.atleast_2d(features)
        if features.shape[1] != self.params.spec.in_dim:
            raise ValueError(f"transition features have width {features.shape[1]}, "
                             f"discriminator expects {self.params.spec.in_dim}")
        return predict(self.params, self._norm(features))

    def train_step(self, real, fake):
        """Update the normalizer with both streams, then one gradient step."""
        for batch in (real, fake):
            if np.atleast_2d(batch).shape[1] != self.params.spec.in_dim:
                raise ValueError("transition batch has the wrong feature width")
        if self.config.normalize:
            self.normalizer.update(real)
            self.normalizer.update(fake)
        self.params, info = update(self.params, self.config, self._norm(real), self._norm(fake),
                                   self.optimizer)
        self.updates += 1
        return info
