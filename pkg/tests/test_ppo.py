from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmamp import nn
from hmamp.discriminator import Discriminator, DiscriminatorConfig
from hmamp.gradcheck import check_surrogate, relative_error
from hmamp.motion import ReferenceSet, windup_clips
from hmamp.ppo import (
    TRAINING_LOG_COLUMNS,
    GaussianPolicy,
    TrainConfig,
    Trainer,
    collect_trajectories,
    compute_gae,
    ppo_update,
    surrogate_loss_and_grads,
)
from hmamp.rewards import RewardWeights
from hmamp.sim import BatchEnv, SimConfig, Termination
from hmamp.sim.env import OBS_DIM

CFG = SimConfig()
TINY = TrainConfig(m=4, n=2, K=32, epochs=2, minibatch=64, episodes=3, n_envs=4,
                   policy_hidden=(16,), value_hidden=(16,))
TINY_DISC = DiscriminatorConfig(hidden=(16,), batch_size=32)


@pytest.fixture(scope="module")
def reference():
    return ReferenceSet.from_clips(windup_clips(CFG)[:2], CFG)


# GAE ---------------------------------------------------------------------

def test_gae_single_terminal_step():
    adv, ret = compute_gae([1.0], [0.0], 0.0, 0.99, 0.95)
    assert adv[0] == 1.0 and ret[0] == 1.0


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.integers(0, 1000))
def test_gae_lambda_one_is_return_minus_value(rewards, seed):
    values = np.random.default_rng(seed).normal(size=len(rewards))
    adv, ret = compute_gae(rewards, values, 0.0, 1.0, 1.0)
    returns = np.cumsum(np.asarray(rewards)[::-1])[::-1]
    assert np.allclose(adv, returns - values, atol=1e-9)
    assert np.allclose(ret, returns, atol=1e-9)


def test_gae_zero_rewards_and_values():
    adv, _ = compute_gae(np.zeros(7), np.zeros(7), 0.0, 0.99, 0.95)
    assert np.all(adv == 0)


def test_gae_bootstraps_terminal_value():
    adv, _ = compute_gae([0.0], [0.0], 2.0, 0.5, 0.95)
    assert adv[0] == 1.0


def test_gae_length_mismatch():
    with pytest.raises(ValueError):
        compute_gae([1.0, 2.0], [0.0], 0.0, 0.99, 0.95)


# surrogate ---------------------------------------------------------------

def _policy_batch(seed=0, n=6):
    rng = np.random.default_rng(seed)
    policy = GaussianPolicy(CFG, (8,), seed=seed)
    obs = policy.offset + 0.1 * rng.normal(size=(n, OBS_DIM))
    actions, logp, _ = policy.act(obs, rng)
    return policy, obs, actions, logp, rng


def test_zero_advantage_gives_zero_gradient():
    policy, obs, actions, logp, _ = _policy_batch()
    _, grad, _ = surrogate_loss_and_grads(policy, obs, actions, logp, np.zeros(len(obs)), 0.2)
    assert np.all(grad == 0)


def test_zero_advantage_update_leaves_policy():
    policy, obs, actions, logp, rng = _policy_batch()
    before = policy.flat.copy()
    value = nn.init_params(nn.MlpSpec((OBS_DIM, 8, 1)), 0)
    batch = {"obs": obs, "actions": actions, "log_probs": logp,
             "advantages": np.zeros(len(obs)), "returns": np.ones(len(obs))}
    ppo_update(policy, value, batch, TINY, rng, nn.Adam(len(before)), nn.Adam(value.spec.n_params))
    assert np.array_equal(policy.flat, before)


def test_clipped_samples_contribute_no_gradient():
    policy, obs, actions, logp, _ = _policy_batch()
    old = logp - 0.5  # ratio e^0.5 > 1.2
    _, grad, info = surrogate_loss_and_grads(policy, obs, actions, old, np.ones(len(obs)), 0.2)
    assert info["clip_frac"] == 1.0
    assert np.all(grad == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_surrogate_gradient_matches_finite_differences(seed):
    analytic, numeric = check_surrogate(np.random.default_rng(seed))
    assert relative_error(analytic, numeric) <= 1e-4


# collection --------------------------------------------------------------

def _collect(weights=RewardWeights(), disc=None, seed=0):
    policy = GaussianPolicy(CFG, (16,), seed=1)
    env = BatchEnv(CFG, 4, seed)
    return collect_trajectories(policy, env, 6, np.random.default_rng(seed), weights, disc,
                                deterministic=True)


def test_deterministic_collection_is_reproducible():
    a, b = _collect(), _collect()
    for x, y in zip(a, b):
        assert np.array_equal(x.q_path, y.q_path) and np.array_equal(x.r, y.r)


def test_every_trajectory_terminates():
    for tr in _collect():
        assert tr.kind in (Termination.TASK_DONE, Termination.COLLISION, Termination.TIMEOUT)
        assert 1 <= len(tr) <= CFG.max_steps


def test_reward_assembly_identity():
    w = RewardWeights()
    for tr in _collect(w, Discriminator(TINY_DISC, seed=0)):
        assert np.array_equal(tr.r, w.alpha_g * tr.r_g + w.beta_s * tr.r_s)
        assert np.all((tr.r_s >= 0) & (tr.r_s <= 1))


def test_zero_style_weight_leaves_goal_only():
    w = replace(RewardWeights(), beta_s=0.0)
    for tr in _collect(w, Discriminator(TINY_DISC, seed=0)):
        assert np.array_equal(tr.r, w.alpha_g * tr.r_g)


# trainer -----------------------------------------------------------------

def test_stats_rows_match_episodes(reference, tmp_path):
    trainer = Trainer(CFG, TINY, RewardWeights(), TINY_DISC, reference)
    trainer.train()
    assert len(trainer.history) == TINY.episodes
    trainer.write_log(tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == ",".join(TRAINING_LOG_COLUMNS)
    assert len(lines) == 1 + TINY.episodes
    assert trainer.discriminator.updates == TINY.episodes * TINY.n


def test_no_discriminator_steps_leave_it_untouched(reference):
    trainer = Trainer(CFG, replace(TINY, n=0), RewardWeights(), TINY_DISC, reference)
    before = trainer.discriminator.params.flat.copy()
    trainer.train(episodes=2)
    assert np.array_equal(trainer.discriminator.params.flat, before)
    assert trainer.discriminator.updates == 0


def test_training_is_reproducible(reference, tmp_path):
    logs = []
    for k in range(2):
        t = Trainer(CFG, TINY, RewardWeights(), TINY_DISC, reference)
        t.train()
        t.write_log(tmp_path / f"log{k}.csv")
        logs.append(((tmp_path / f"log{k}.csv").read_bytes(), t.policy.flat))
    assert logs[0][0] == logs[1][0]
    assert np.array_equal(logs[0][1], logs[1][1])


def test_contact_only_on_final_step(reference):
    trainer = Trainer(CFG, TINY, RewardWeights(), TINY_DISC, reference)
    trainer.train(episodes=1)
    for tr in trainer.trajectories:
        hits = tr.contact_steps
        assert (tr.kind is Termination.TASK_DONE) == (len(hits) > 0)
        if len(hits):
            assert list(hits) == [len(tr) - 1]


@pytest.mark.parametrize("bad", [dict(m=0), dict(n=-1), dict(gamma=0.0), dict(gae_lambda=1.5),
                                 dict(clip_epsilon=0.0)])
def test_invalid_train_config(bad):
    with pytest.raises(ValueError):
        TrainConfig(**bad)


def test_train_config_round_trip():
    assert TrainConfig.from_dict(TINY.to_dict()) == TINY
