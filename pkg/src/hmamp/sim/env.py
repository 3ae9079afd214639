"""Hammering environment: reset / step / termination on top of the kernels.

The functional API (:func:`reset`, :func:`step`, :func:`check_termination`)
handles one environment and returns fresh state objects. :class:`BatchEnv`
runs many independent environments in lockstep for rollouts and
evaluation; both paths share the same compiled step kernel.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .config import ConfigError, SimConfig
from .kinematics import chain_points

__all__ = [
    "OBS_DIM",
    "ContractError",
    "Termination",
    "SimState",
    "Observation",
    "ContactEvent",
    "StepLog",
    "reset",
    "step",
    "pd_torque",
    "check_termination",
    "observe",
    "BatchEnv",
    "write_trajectory_csv",
    "TRAJECTORY_COLUMNS",
]

OBS_DIM = 14


class ContractError(RuntimeError):
    """Raised when the environment is driven outside its contract."""


class Termination(str, enum.Enum):
    RUNNING = "running"
    TASK_DONE = "task_done"
    COLLISION = "collision"
    TIMEOUT = "timeout"

    @property
    def done(self):
        return self is not Termination.RUNNING


_KIND_CODE = {Termination.RUNNING: 0, Termination.TASK_DONE: 1,
              Termination.COLLISION: 2, Termination.TIMEOUT: 3}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    nail_pos: np.ndarray
    randomized_friction: float
    randomized_gain_scale: float
    nail_depth: float = 0.0
    episode_step: int = 0
    contact_active: bool = False
    prev_action: np.ndarray = None
    termination: Termination = Termination.RUNNING

    def copy(self):
        return replace(self, q=self.q.copy(), qdot=self.qdot.copy(), nail_pos=self.nail_pos.copy(),
                       prev_action=self.prev_action.copy())


@dataclass
class Observation:
    hammer_pos: np.ndarray
    nail_pos: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    ee_orientation: float
    prev_action: np.ndarray

    def vector(self):
        return np.concatenate([self.hammer_pos, self.nail_pos, self.q, self.qdot,
                               [self.ee_orientation], self.prev_action])

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=np.float64)
        return cls(v[0:2], v[2:4], v[4:7], v[7:10], float(v[10]), v[11:14])


@dataclass
class ContactEvent:
    force_vec: np.ndarray
    step_index: int
    penetration: float = 0.0

    @property
    def force_norm(self):
        return float(np.linalg.norm(self.force_vec))


@dataclass
class StepLog:
    """Per-step quantities that are not part of the state."""

    torque: np.ndarray
    work: float
    force_vec: np.ndarray = field(default_factory=lambda: np.zeros(2))


def _gains(cfg):
    g = np.asarray(cfg.base_pd_gains)
    return g[:, 0].copy(), g[:, 1].copy()


def pd_torque(q_target, state, config):
    """Joint torques of the (randomly scaled) PD controller."""
    kp, kd = _gains(config)
    s = state.randomized_gain_scale
    return s * kp * (np.asarray(q_target) - state.q) - s * kd * state.qdot


def _clamp_action(action, cfg):
    lim = np.asarray(cfg.joint_limits)
    return np.clip(np.asarray(action, dtype=np.float64), lim[:, 0], lim[:, 1])


def _obs_batch(q, qd, nail, prev_action, cfg):
    pts = chain_points(q, cfg)
    return np.concatenate([pts["head"], nail, q, qd, q.sum(axis=-1, keepdims=True), prev_action],
                          axis=-1)


def _add_noise(obs, cfg, rng):
    """Uniform noise: Cartesian on hammer/nail positions, joint on angles."""
    obs = obs.copy()
    c, j = cfg.cartesian_noise, cfg.joint_noise
    obs[..., 0:4] += rng.uniform(-c, c, size=obs[..., 0:4].shape)
    obs[..., 4:7] += rng.uniform(-j, j, size=obs[..., 4:7].shape)
    obs[..., 10] += rng.uniform(-j, j, size=obs[..., 10].shape)
    return obs


def observe(state, config, rng=None):
    """Observation of ``state``; noisy when enabled in config and rng given."""
    v = _obs_batch(state.q[None], state.qdot[None], state.nail_pos[None],
                   state.prev_action[None], config)[0]
    if config.observation_noise and rng is not None:
        v = _add_noise(v, config, rng)
    return Observation.from_vector(v)


def _sample_episode(cfg, rng):
    friction = rng.uniform(*cfg.friction_range)
    gain_scale = rng.uniform(*cfg.pd_gain_scale_range)
    (xlo, xhi), (ylo, yhi) = cfg.nail_position_range
    nail = np.array([rng.uniform(xlo, xhi), rng.uniform(ylo, yhi)])
    return friction, gain_scale, nail


def reset(config, seed):
    """Fresh episode at the home pose with randomized friction, gains and nail.

    ``seed`` may be an int or a ``numpy.random.Generator``; with an int the
    result is a pure function of ``(config, seed)``.
    """
    if not isinstance(config, SimConfig):
        raise ConfigError("reset needs a SimConfig")
    config.validate()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    friction, gain_scale, nail = _sample_episode(config, rng)
    home = np.array(config.home_q)
    state = SimState(q=home.copy(), qdot=np.zeros(3), nail_pos=nail,
                     randomized_friction=friction, randomized_gain_scale=gain_scale,
                     prev_action=home.copy())
    return state, observe(state, config, rng)


def _collision_batch(q, cfg):
    pts = chain_points(q, cfg)
    below = np.zeros(q.shape[0], dtype=bool)
    for name in ("elbow", "wrist", "ee", "head", "aux"):
        below |= pts[name][:, 1] < cfg.table_height
    folded = (np.abs(q[:, 1]) > cfg.self_collision_limit) | (np.abs(q[:, 2]) > cfg.self_collision_limit)
    return below | folded


def check_termination(state, contact, config=None):
    """Classify the state reached after a step.

    Contact wins over everything: an episode that touched the nail this
    step is finished. Table penetration (or folding the arm onto itself)
    is a collision; reaching ``max_steps`` is a timeout.
    """
    config = config or SimConfig()
    if contact is not None:
        return Termination.TASK_DONE
    if _collision_batch(state.q[None], config)[0]:
        return Termination.COLLISION
    if state.episode_step >= config.max_steps:
        return Termination.TIMEOUT
    return Termination.RUNNING


def _kernel_step(q, qd, q_target, gain_scale, friction, nail, cfg, contact_enabled=True):
    kp, kd = _gains(cfg)
    return _kernels.control_step(
        q, qd, q_target, kp, kd, gain_scale, friction, nail, _kernels.pack_params(cfg),
        cfg.dt, cfg.substeps, cfg.capture_radius, cfg.nail_stiffness, cfg.nail_damping,
        contact_enabled)


def step(state, action, config, rng=None, return_log=False):
    """Apply target joint positions ``action`` for one control period.

    Returns ``(state, observation, contact_or_None, termination)`` and,
    with ``return_log=True``, a :class:`StepLog` as fifth element.
    """
    if state.termination.done:
        raise ContractError(f"episode already ended ({state.termination.value})")
    if state.episode_step >= config.max_steps:
        raise ContractError("episode_step already at max_steps")
    target = _clamp_action(action, config)
    q = state.q[None].copy()
    qd = state.qdot[None].copy()
    hit, force, pen, tau, work = _kernel_step(
        q, qd, target[None], np.array([state.randomized_gain_scale]),
        np.array([state.randomized_friction]), state.nail_pos[None], config)
    new = SimState(q=q[0], qdot=qd[0], nail_pos=state.nail_pos.copy(),
                   randomized_friction=state.randomized_friction,
                   randomized_gain_scale=state.randomized_gain_scale,
                   nail_depth=state.nail_depth + float(pen[0]),
                   episode_step=state.episode_step + 1,
                   contact_active=bool(hit[0]), prev_action=target)
    contact = ContactEvent(force[0].copy(), new.episode_step, float(pen[0])) if hit[0] else None
    new.termination = check_termination(new, contact, config)
    obs = observe(new, config, rng)
    if return_log:
        return new, obs, contact, new.termination, StepLog(tau[0], float(work[0]), force[0].copy())
    return new, obs, contact, new.termination


class BatchEnv:
    """``n`` independent environments stepped together.

    Each environment owns a generator spawned from ``seed``, used for its
    episode randomization and its observation noise, so results do not
    depend on how many other environments are active.
    """

    def __init__(self, config, n, seed):
        self.config = config
        self.n = n
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.rngs = [np.random.default_rng(s) for s in ss.spawn(n)]
        self.q = np.zeros((n, 3))
        self.qd = np.zeros((n, 3))
        self.nail = np.zeros((n, 2))
        self.friction = np.ones(n)
        self.gain_scale = np.ones(n)
        self.prev_action = np.zeros((n, 3))
        self.steps = np.zeros(n, dtype=int)
        self.nail_depth = np.zeros(n)
        self.done = np.ones(n, dtype=bool)
        self.kind = np.zeros(n, dtype=int)

    def reset(self, config=None):
        if config is not None:
            self.config = config
        cfg = self.config
        home = np.array(cfg.home_q)
        for i, rng in enumerate(self.rngs):
            self.friction[i], self.gain_scale[i], self.nail[i] = _sample_episode(cfg, rng)
        self.q[:] = home
        self.qd[:] = 0.0
        self.prev_action[:] = home
        self.steps[:] = 0
        self.nail_depth[:] = 0.0
        self.done[:] = False
        self.kind[:] = 0
        return self._observe(np.arange(self.n))

    def _observe(self, idx):
        cfg = self.config
        obs = _obs_batch(self.q[idx], self.qd[idx], self.nail[idx], self.prev_action[idx], cfg)
        if cfg.observation_noise:
            for row, i in enumerate(idx):
                obs[row] = _add_noise(obs[row], cfg, self.rngs[i])
        return obs

    def state(self, i):
        return SimState(q=self.q[i].copy(), qdot=self.qd[i].copy(), nail_pos=self.nail[i].copy(),
                        randomized_friction=float(self.friction[i]),
                        randomized_gain_scale=float(self.gain_scale[i]),
                        nail_depth=float(self.nail_depth[i]), episode_step=int(self.steps[i]),
                        prev_action=self.prev_action[i].copy(),
                        termination=_CODE_KIND[int(self.kind[i])])

    def step(self, idx, targets):
        """Step the environments listed in ``idx`` with joint targets.

        Returns a dict of arrays aligned with ``idx``: ``obs``, ``contact``,
        ``force``, ``torque``, ``work``, ``kind`` (termination codes, see
        :data:`KIND_CODES`).
        """
        idx = np.asarray(idx, dtype=int)
        if np.any(self.done[idx]):
            raise ContractError("step called on a finished environment")
        cfg = self.config
        targets = _clamp_action(targets, cfg)
        q = self.q[idx].copy()
        qd = self.qd[idx].copy()
        hit, force, pen, tau, work = _kernel_step(q, qd, targets, self.gain_scale[idx],
                                                  self.friction[idx], self.nail[idx], cfg)
        self.q[idx] = q
        self.qd[idx] = qd
        self.prev_action[idx] = targets
        self.steps[idx] += 1
        self.nail_depth[idx] += pen
        collided = _collision_batch(q, cfg)
        kind = np.where(hit, 1, np.where(collided, 2, np.where(self.steps[idx] >= cfg.max_steps, 3, 0)))
        self.kind[idx] = kind
        self.done[idx] = kind != 0
        return {"obs": self._observe(idx), "contact": hit, "force": force, "torque": tau,
                "work": work, "kind": kind}


KIND_CODES = {kind: code for kind, code in _KIND_CODE.items()}

TRAJECTORY_COLUMNS = ["step", "q1", "q2", "q3", "qd1", "qd2", "qd3", "xf_x", "xf_y",
                      "xc_x", "xc_y", "force_norm", "tau1", "tau2", "tau3", "force_x", "force_y"]


def write_trajectory_csv(path, log):
    """Write an :class:`~hmamp.metrics.EpisodeLog`-like record to CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for t in range(len(log.q)):
            f = log.force[t]
            w.writerow([t, *map(repr, map(float, log.q[t])), *map(repr, map(float, log.qdot[t])),
                        *map(repr, map(float, log.ee_path[t])), *map(repr, map(float, log.nail_pos)),
                        repr(float(np.hypot(*f))), *map(repr, map(float, log.torque[t])),
                        repr(float(f[0])), repr(float(f[1]))])

