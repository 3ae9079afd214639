"""Finite-difference checks of every hand-written gradient.

Each check draws a small random network and inputs and returns the
analytic gradient together with central differences; the harness records
the worst relative error
``||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .discriminator import disc_loss_and_grads
from .ppo import GaussianPolicy, surrogate_loss_and_grads
from .sim.config import SimConfig
from .sim.env import OBS_DIM

__all__ = ["CHECKS", "CheckResult", "numeric_gradient", "relative_error", "run_checks",
           "format_results"]

TOLERANCE = 1e-4


def numeric_gradient(f, x, h=1e-6):
    """Central differences of scalar ``f`` at flat array ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def relative_error(a, b):
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def _tiny_spec(rng, in_dim=None, out_dim=None):
    d_in = in_dim or int(rng.integers(2, 5))
    hidden = tuple(int(h) for h in rng.integers(2, 6, size=int(rng.integers(1, 3))))
    return nn.MlpSpec((d_in, *hidden, out_dim or int(rng.integers(1, 3))))


def _random_params(spec, rng, scale=1.0):
    # larger-than-init weights so the ELU curvature is exercised on both sides
    return nn.ParamVector(spec, rng.normal(0.0, scale, spec.n_params))


def check_backward(rng):
    spec = _tiny_spec(rng)
    p = _random_params(spec, rng)
    x = rng.normal(size=(int(rng.integers(1, 5)), spec.in_dim))
    w = rng.normal(size=(len(x), spec.out_dim))
    _, fc = nn.forward(p, x, cache=True)
    analytic = nn.backward_params(fc, w).flat
    numeric = numeric_gradient(lambda f: np.sum(w * nn.forward(nn.ParamVector(spec, f), x)), p.flat)
    return analytic, numeric


def check_input_gradient(rng):
    spec = _tiny_spec(rng, out_dim=1)
    p = _random_params(spec, rng)
    x = rng.normal(size=spec.in_dim)
    analytic = nn.input_gradient(p, x)
    numeric = numeric_gradient(lambda v: float(nn.forward(p, v)[0]), x)
    return analytic, numeric


def check_double_backprop(rng):
    spec = _tiny_spec(rng, out_dim=1)
    p = _random_params(spec, rng)
    x = rng.normal(size=(int(rng.integers(1, 5)), spec.in_dim))
    w = rng.uniform(0.5, 1.5, size=len(x))
    _, grad = nn.grad_penalty_backward(p, x, w)

    def penalty(flat):
        g = nn.input_gradient(nn.ParamVector(spec, flat), x)
        return float(np.sum(w * np.sum(g * g, axis=1)))

    return grad.flat, numeric_gradient(penalty, p.flat)


def check_disc_loss(rng):
    spec = _tiny_spec(rng, out_dim=1)
    p = _random_params(spec, rng, scale=0.7)
    real = rng.normal(size=(int(rng.integers(1, 5)), spec.in_dim))
    fake = rng.normal(size=(int(rng.integers(1, 5)), spec.in_dim))
    w_gp = float(rng.uniform(0.1, 2.0))
    _, grad, _ = disc_loss_and_grads(p, real, fake, w_gp)
    loss = lambda f: disc_loss_and_grads(nn.ParamVector(spec, f), real, fake, w_gp)[0]
    return grad.flat, numeric_gradient(loss, p.flat)


def check_surrogate(rng, eps=0.2, h=1e-6):
    """Clipped surrogate on 4 samples; ratios are kept away from the kinks."""
    hidden = (int(rng.integers(2, 5)),)
    policy = GaussianPolicy(SimConfig(), hidden, seed=int(rng.integers(1 << 30)), init_std=0.5)
    policy.log_std = rng.normal(-0.5, 0.2, 3)
    obs = rng.normal(size=(4, OBS_DIM)) * 0.1 + policy.offset
    while True:
        head = policy.head(obs)
        actions = head.mean + head.std * rng.normal(size=(4, 3))
        logp, _ = nn.log_prob_and_entropy(head, actions)
        # old log-probs set so that ratios land inside or outside the clip range
        old = logp - rng.uniform(-0.5, 0.5, size=4)
        ratio = np.exp(logp - old)
        if np.all(np.minimum(np.abs(ratio - 1 - eps), np.abs(ratio - 1 + eps)) > 1e-3):
            break
    adv = rng.normal(size=4)
    coef = float(rng.uniform(0.0, 0.01))
    flat0 = policy.flat.copy()
    _, grad, _ = surrogate_loss_and_grads(policy, obs, actions, old, adv, eps, coef)

    def loss(flat):
        policy.set_flat(flat)
        return surrogate_loss_and_grads(policy, obs, actions, old, adv, eps, coef)[0]

    numeric = numeric_gradient(loss, flat0, h)
    policy.set_flat(flat0)
    return grad, numeric


CHECKS = {
    "nn_backward": check_backward,
    "input_gradient": check_input_gradient,
    "double_backprop_penalty": check_double_backprop,
    "discriminator_loss": check_disc_loss,
    "ppo_surrogate": check_surrogate,
}


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    instances: int

    @property
    def passed(self):
        return self.max_rel_error <= TOLERANCE


def run_checks(seed=0, instances=100, corrupt=None):
    """Run every check on ``instances`` random problems.

    ``corrupt`` names a check whose analytic gradient is scaled by 1.01
    before comparison, to confirm the harness can fail.
    """
    if corrupt is not None and corrupt not in CHECKS:
        raise ValueError(f"unknown check {corrupt!r}")
    results = []
    for k, (name, fn) in enumerate(CHECKS.items()):
        rng = np.random.default_rng([seed, k])
        worst = 0.0
        for _ in range(instances):
            analytic, numeric = fn(rng)
            if name == corrupt:
                analytic = analytic * 1.01
            worst = max(worst, relative_error(analytic, numeric))
        results.append(CheckResult(name, worst, instances))
    return results


def format_results(results):
    lines = [f"{r.name:<26} max rel err {r.max_rel_error:.3e}  "
             f"{'ok' if r.passed else 'FAIL'} ({r.instances} instances)" for r in results]
    return "\n".join(lines) + "\n"
