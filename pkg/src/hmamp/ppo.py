"""PPO with an adversarial style reward.

One training episode:

1. roll out ``m`` trajectories with the current policy (each in its own
   environment) and score every transition with the discriminator as it
   was before this episode;
2. push the trajectories into the replay buffer and run ``n``
   discriminator updates on ``K`` reference vs ``K`` replayed transitions;
3. run the clipped-surrogate PPO update on the collected trajectories.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .discriminator import Discriminator, DiscriminatorConfig
from .metrics import EpisodeLog, frechet_distance, resample_by_arclength
from .motion import ReplayBuffer, RunningMeanStd, buffer_store, disc_features, sample_transitions
from .rewards import RewardWeights, distance_reward, force_reward, style_reward, total_reward
from .sim.config import SimConfig
from .sim.env import OBS_DIM, BatchEnv, Termination
from .sim.kinematics import chain_points

__all__ = [
    "TrainConfig",
    "GaussianPolicy",
    "Trajectory",
    "collect_trajectories",
    "compute_gae",
    "surrogate_loss_and_grads",
    "ppo_update",
    "Trainer",
    "TRAINING_LOG_COLUMNS",
]

_KIND = {0: Termination.RUNNING, 1: Termination.TASK_DONE, 2: Termination.COLLISION,
         3: Termination.TIMEOUT}


@dataclass(frozen=True)
class TrainConfig:
    m: int = 16  # trajectories per episode
    n: int = 4  # discriminator updates per episode
    K: int = 256  # transitions per discriminator batch
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_epsilon: float = 0.2
    policy_lr: float = 3e-4
    value_lr: float = 1e-3
    epochs: int = 5
    minibatch: int = 256
    entropy_coef: float = 0.0
    max_grad_norm: float = 1.0
    episodes: int = 500
    n_envs: int = 16
    seed: int = 0
    policy_hidden: tuple = (128, 64)
    value_hidden: tuple = (128, 64)
    action_scale: float = 1.0
    init_std: float = 0.3
    normalize_rewards: bool = True
    buffer_capacity: int = 100_000
    use_amp: bool = True

    def __post_init__(self):
        object.__setattr__(self, "policy_hidden", tuple(int(h) for h in self.policy_hidden))
        object.__setattr__(self, "value_hidden", tuple(int(h) for h in self.value_hidden))
        for name in ("m", "K", "epochs", "minibatch", "episodes", "n_envs", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.n < 0:
            raise ValueError("n must be nonnegative")
        if not (0 < self.gamma <= 1 and 0 < self.gae_lambda <= 1):
            raise ValueError("gamma and gae_lambda must lie in (0, 1]")
        if self.clip_epsilon <= 0:
            raise ValueError("clip_epsilon must be positive")

    def to_dict(self):
        d = asdict(self)
        d["policy_hidden"] = list(self.policy_hidden)
        d["value_hidden"] = list(self.value_hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _input_transform(cfg):
    """Fixed affine map from observations to network inputs."""
    home = np.array(cfg.home_q)
    offset = np.concatenate([[0.6, -0.2], [0.6, -0.3], home, np.zeros(3), [home.sum()], home])
    scale = np.concatenate([np.full(4, 5.0), np.ones(3), np.full(3, 0.1), [1.0], np.ones(3)])
    return offset, scale


class GaussianPolicy:
    """MLP mean over (scaled) observations plus a free log standard deviation.

    The raw action ``a`` maps to joint targets ``home + action_scale * a``.
    """

    def __init__(self, sim_config, hidden=(128, 64), seed=0, init_std=0.3, action_scale=1.0):
        self.sim_config = sim_config
        self.params = nn.init_params(nn.MlpSpec((OBS_DIM, *hidden, 3)), seed)
        self.log_std = np.full(3, np.log(init_std))
        self.action_scale = action_scale
        self.offset, self.scale = _input_transform(sim_config)
        self.home = np.array(sim_config.home_q)

    def inputs(self, obs):
        return (np.atleast_2d(obs) - self.offset) * self.scale

    def head(self, obs):
        return nn.GaussianPolicyHead(nn.forward(self.params, self.inputs(obs)), self.log_std)

    def targets(self, raw_action):
        return self.home + self.action_scale * np.asarray(raw_action)

    def act(self, obs, rng, deterministic=False):
        """(raw actions, log-probs, joint targets) for a batch of observations."""
        head = self.head(obs)
        if deterministic:
            a = head.mean
            logp, _ = nn.log_prob_and_entropy(head, a)
        else:
            a, logp = nn.policy_sample(head, rng)
        return a, logp, self.targets(a)

    @property
    def flat(self):
        return np.concatenate([self.params.flat, self.log_std])

    def set_flat(self, flat):
        n = self.params.spec.n_params
        self.params = nn.ParamVector(self.params.spec, flat[:n].copy())
        self.log_std = flat[n:].copy()


@dataclass
class Trajectory:
    obs: np.ndarray  # (T, obs)
    actions: np.ndarray  # (T, 3) raw policy outputs
    log_probs: np.ndarray  # (T,)
    q_path: np.ndarray  # (T+1, 3)
    qdot_path: np.ndarray  # (T+1, 3)
    head_path: np.ndarray  # (T+1, 2)
    nail_pos: np.ndarray
    force: np.ndarray  # (T, 2)
    torque: np.ndarray  # (T, 3)
    kind: Termination
    last_obs: np.ndarray
    r_g: np.ndarray = None
    r_f: np.ndarray = None
    r_d: np.ndarray = None
    d: np.ndarray = None
    r_s: np.ndarray = None
    r: np.ndarray = None
    values: np.ndarray = None
    terminal_value: float = 0.0

    def __len__(self):
        return len(self.actions)

    @property
    def contact_steps(self):
        return np.flatnonzero(np.linalg.norm(self.force, axis=1) > 0)

    def episode_log(self, dt):
        zero = np.zeros((1, 2))
        return EpisodeLog(force=np.vstack([zero, self.force]),
                          torque=np.vstack([np.zeros((1, 3)), self.torque]),
                          qdot=self.qdot_path, ee_path=self.head_path, dt=dt, q=self.q_path,
                          nail_pos=self.nail_pos)


def _rollout(policy, env, rng, deterministic):
    """Run every environment of ``env`` to termination."""
    cfg = env.config
    obs = env.reset()
    n = env.n
    recs = [dict(obs=[], act=[], logp=[], q=[env.q[i].copy()], qd=[env.qd[i].copy()],
                 force=[], torque=[]) for i in range(n)]
    current = obs
    active = np.arange(n)
    last_obs = np.zeros((n, OBS_DIM))
    while len(active):
        a, logp, targets = policy.act(current, rng, deterministic)
        out = env.step(active, targets)
        for row, i in enumerate(active):
            rec = recs[i]
            rec["obs"].append(current[row])
            rec["act"].append(a[row])
            rec["logp"].append(logp[row])
            rec["q"].append(env.q[i].copy())
            rec["qd"].append(env.qd[i].copy())
            rec["force"].append(out["force"][row])
            rec["torque"].append(out["torque"][row])
        still = out["kind"] == 0
        for row in np.flatnonzero(~still):
            last_obs[active[row]] = out["obs"][row]
        current = out["obs"][still]
        active = active[still]
    trajs = []
    for i, rec in enumerate(recs):
        q = np.array(rec["q"])
        trajs.append(Trajectory(
            obs=np.array(rec["obs"]), actions=np.array(rec["act"]), log_probs=np.array(rec["logp"]),
            q_path=q, qdot_path=np.array(rec["qd"]), head_path=chain_points(q, cfg)["head"],
            nail_pos=env.nail[i].copy(), force=np.array(rec["force"]),
            torque=np.array(rec["torque"]), kind=_KIND[int(env.kind[i])], last_obs=last_obs[i]))
    return trajs


def assign_rewards(trajs, weights, discriminator=None, sim_config=None):
    """Fill goal, style and total rewards of collected trajectories.

    Without a discriminator (or with ``beta_s = 0``) the style reward and
    score are recorded as zeros.
    """
    cfg = sim_config or SimConfig()
    for tr in trajs:
        T = len(tr)
        contact = np.linalg.norm(tr.force, axis=1)
        tr.r_f = np.where(contact > 0, force_reward(contact, weights.F_d), 0.0)
        tr.r_d = distance_reward(tr.head_path[1:], tr.nail_pos)
        tr.r_g = weights.omega_f * tr.r_f + weights.omega_d * tr.r_d
        if discriminator is not None and T:
            tr.d = discriminator.score(disc_features(tr.q_path[:-1], tr.q_path[1:], cfg))
            tr.r_s = style_reward(tr.d, weights)
        else:
            tr.d = np.zeros(T)
            tr.r_s = np.zeros(T)
        tr.r = total_reward(tr.r_g, tr.r_s, weights)
    return trajs


def collect_trajectories(policy, env, m, rng, weights=RewardWeights(), discriminator=None,
                         deterministic=False):
    """``m`` trajectories with rewards, collected ``env.n`` at a time."""
    trajs = []
    while len(trajs) < m:
        trajs.extend(_rollout(policy, env, rng, deterministic))
    trajs = trajs[:m]
    return assign_rewards(trajs, weights, discriminator, env.config)


def compute_gae(rewards, values, terminal_value, gamma, lam):
    """Generalized advantage estimates and returns for one trajectory.

    ``terminal_value`` is the value of the state after the last step (zero
    for true terminations, the critic's estimate for timeouts).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape:
        raise ValueError("rewards and values must have equal length")
    T = len(rewards)
    adv = np.zeros(T)
    nxt = terminal_value
    acc = 0.0
    for t in range(T - 1, -1, -1):
        delta = rewards[t] + gamma * nxt - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        nxt = values[t]
    return adv, adv + values


def surrogate_loss_and_grads(policy, obs, actions, old_log_probs, advantages, clip_epsilon,
                             entropy_coef=0.0):
    """Clipped surrogate loss (to minimize) and its gradient w.r.t.
    ``policy.flat``. Returns ``(loss, grad, info)``."""
    N = len(obs)
    mean, fc = nn.forward(policy.params, policy.inputs(obs), cache=True)
    head = nn.GaussianPolicyHead(mean, policy.log_std)
    logp, ent = nn.log_prob_and_entropy(head, actions)
    ratio = np.exp(logp - old_log_probs)
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    unclipped_obj = ratio * advantages
    clipped_obj = clipped * advantages
    obj = np.minimum(unclipped_obj, clipped_obj)
    loss = -obj.mean() - entropy_coef * ent.mean()
    # gradient flows only where the unclipped branch is the minimum
    active = unclipped_obj <= clipped_obj
    dlogp = np.where(active, -advantages * ratio / N, 0.0)
    d_mean, d_log_std = nn.gaussian_log_prob_grads(head, actions)
    g_mean = dlogp[:, None] * d_mean
    g_log_std = (dlogp[:, None] * d_log_std).sum(axis=0) - entropy_coef * np.ones(3)
    g_params = nn.backward_params(fc, g_mean).flat
    info = {"clip_frac": float(np.mean(np.abs(ratio - 1.0) > clip_epsilon)),
            "approx_kl": float(np.mean(old_log_probs - logp)), "entropy": float(ent.mean())}
    return float(loss), np.concatenate([g_params, g_log_std]), info


def value_loss_and_grads(value_params, inputs, returns):
    v, fc = nn.forward(value_params, inputs, cache=True)
    err = v[:, 0] - returns
    loss = 0.5 * np.mean(err**2)
    grad = nn.backward_params(fc, (err / len(err))[:, None]).flat
    return float(loss), grad


def _clip_norm(g, max_norm):
    if max_norm and max_norm > 0:
        norm = np.linalg.norm(g)
        if norm > max_norm:
            g = g * (max_norm / norm)
    return g


def ppo_update(policy, value_params, batch, config, rng, policy_opt, value_opt):
    """Several epochs of minibatch Adam on the PPO losses, in place.

    ``batch`` holds ``obs``, ``actions``, ``log_probs``, ``advantages``
    (already normalized) and ``returns``. Returns (value params, stats).
    """
    N = len(batch["obs"])
    if N == 0:
        raise ValueError("empty PPO batch")
    inputs = policy.inputs(batch["obs"])
    stats = {"policy_loss": [], "value_loss": [], "clip_frac": [], "approx_kl": []}
    for _ in range(config.epochs):
        perm = rng.permutation(N)
        for start in range(0, N, config.minibatch):
            idx = perm[start:start + config.minibatch]
            loss, g, info = surrogate_loss_and_grads(
                policy, batch["obs"][idx], batch["actions"][idx], batch["log_probs"][idx],
                batch["advantages"][idx], config.clip_epsilon, config.entropy_coef)
            flat = policy.flat
            policy_opt.step(flat, _clip_norm(g, config.max_grad_norm))
            policy.set_flat(flat)
            vloss, vg = value_loss_and_grads(value_params, inputs[idx], batch["returns"][idx])
            value_opt.step(value_params.flat, _clip_norm(vg, config.max_grad_norm))
            stats["policy_loss"].append(loss)
            stats["value_loss"].append(vloss)
            stats["clip_frac"].append(info["clip_frac"])
            stats["approx_kl"].append(info["approx_kl"])
    return value_params, {k: float(np.mean(v)) for k, v in stats.items()}


TRAINING_LOG_COLUMNS = ("episode", "mean_r_g", "mean_r_s", "disc_loss", "mean_d_real",
                        "mean_d_fake", "success_rate", "frechet_eval")


@dataclass
class EpisodeStats:
    episode: int
    mean_r_g: float
    mean_r_s: float
    disc_loss: float
    mean_d_real: float
    mean_d_fake: float
    success_rate: float
    frechet_eval: float
    extra: dict = field(default_factory=dict)

    def row(self):
        return [self.episode, self.mean_r_g, self.mean_r_s, self.disc_loss, self.mean_d_real,
                self.mean_d_fake, self.success_rate, self.frechet_eval]


class Trainer:
    """Owns every learner (policy, critic, discriminator) and buffer."""

    def __init__(self, sim_config=SimConfig(), train_config=TrainConfig(),
                 weights=RewardWeights(), disc_config=DiscriminatorConfig(), reference=None):
        self.sim_config = sim_config
        self.config = train_config
        self.weights = weights
        self.disc_config = disc_config
        self.reference = reference
        c = train_config
        ss = np.random.SeedSequence(c.seed)
        s_policy, s_value, s_disc, s_env, s_rng = ss.spawn(5)
        self.policy = GaussianPolicy(sim_config, c.policy_hidden, int(s_policy.generate_state(1)[0]),
                                     c.init_std, c.action_scale)
        self.value = nn.init_params(nn.MlpSpec((OBS_DIM, *c.value_hidden, 1)),
                                    int(s_value.generate_state(1)[0]))
        self.policy_opt = nn.Adam(len(self.policy.flat), lr=c.policy_lr)
        self.value_opt = nn.Adam(self.value.spec.n_params, lr=c.value_lr)
        self.amp = c.use_amp and c.n > 0 and reference is not None
        self.discriminator = Discriminator(disc_config, int(s_disc.generate_state(1)[0]))
        self.buffer = ReplayBuffer(c.buffer_capacity)
        self.env = BatchEnv(sim_config, c.n_envs, s_env)
        self.rng = np.random.default_rng(s_rng)
        self.return_rms = RunningMeanStd(1)
        self.episode = 0
        self.history = []
        self.trajectories = []

    # -- helpers -------------------------------------------------------------
    def _reward_scale(self, trajs):
        if not self.config.normalize_rewards:
            return 1.0
        running = []
        for tr in trajs:
            acc = 0.0
            for r in tr.r:
                acc = acc * self.config.gamma + r
                running.append(acc)
        self.return_rms.update(np.array(running)[:, None])
        return float(np.sqrt(self.return_rms.var[0]) + 1e-8)

    def _values(self, obs):
        return nn.forward(self.value, self.policy.inputs(obs))[:, 0]

    def _reference_paths(self):
        return [] if self.reference is None else self.reference.head_paths

    # -- one episode -----------------------------------------------------------
    def train_episode(self):
        c = self.config
        disc = self.discriminator if self.amp else None
        trajs = collect_trajectories(self.policy, self.env, c.m, self.rng, self.weights, disc)
        if self.amp:
            for tr in trajs:
                buffer_store(self.buffer, tr, self.sim_config)
        d_info = {"loss": float("nan"), "mean_d_real": float("nan"), "mean_d_fake": float("nan")}
        if self.amp:
            infos = []
            for _ in range(c.n):
                real = sample_transitions(self.reference, c.K, self.rng)
                fake = sample_transitions(self.buffer, c.K, self.rng)
                infos.append(self.discriminator.train_step(real, fake))
            d_info = {k: float(np.mean([i[k] for i in infos])) for k in infos[0]}

        scale = self._reward_scale(trajs)
        obs, acts, logps, advs, rets = [], [], [], [], []
        for tr in trajs:
            tr.values = self._values(tr.obs)
            tv = 0.0
            if tr.kind is Termination.TIMEOUT:
                tv = float(self._values(tr.last_obs[None])[0])
            tr.terminal_value = tv
            adv, ret = compute_gae(tr.r / scale, tr.values, tv, c.gamma, c.gae_lambda)
            obs.append(tr.obs)
            acts.append(tr.actions)
            logps.append(tr.log_probs)
            advs.append(adv)
            rets.append(ret)
        adv = np.concatenate(advs)
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        batch = {"obs": np.concatenate(obs), "actions": np.concatenate(acts),
                 "log_probs": np.concatenate(logps), "advantages": adv,
                 "returns": np.concatenate(rets)}
        self.value, p_info = ppo_update(self.policy, self.value, batch, c, self.rng,
                                        self.policy_opt, self.value_opt)

        paths = self._reference_paths()
        fd = float("nan")
        if paths:
            fd = float(np.mean([min(frechet_distance(resample_by_arclength(tr.head_path),
                                                     resample_by_arclength(p)) for p in paths)
                                for tr in trajs]))
        stats = EpisodeStats(
            episode=self.episode,
            mean_r_g=float(np.mean(np.concatenate([tr.r_g for tr in trajs]))),
            mean_r_s=float(np.mean(np.concatenate([tr.r_s for tr in trajs]))),
            disc_loss=d_info["loss"], mean_d_real=d_info["mean_d_real"],
            mean_d_fake=d_info["mean_d_fake"],
            success_rate=float(np.mean([tr.kind is Termination.TASK_DONE for tr in trajs])),
            frechet_eval=fd,
            extra={"mean_len": float(np.mean([len(t) for t in trajs])), "reward_scale": scale,
                   "std": float(np.exp(self.policy.log_std).mean()), **p_info})
        self.history.append(stats)
        self.trajectories = trajs
        self.episode += 1
        return stats

    def train(self, episodes=None, callback=None):
        for _ in range(self.config.episodes if episodes is None else episodes):
            stats = self.train_episode()
            if callback is not None:
                callback(self, stats)
        return self.history

    def write_log(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAINING_LOG_COLUMNS)
            for s in self.history:
                w.writerow([s.episode, *[repr(float(v)) for v in s.row()[1:]]])
