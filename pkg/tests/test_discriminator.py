import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmamp import nn
from hmamp.discriminator import (
    Discriminator,
    DiscriminatorConfig,
    disc_loss_and_grads,
    predict,
    update,
)
from hmamp.gradcheck import numeric_gradient, relative_error
from hmamp.motion import FEATURE_DIM
from hmamp.rewards import RewardWeights, style_reward


def _small(seed=0, sizes=(4, 5, 1)):
    spec = nn.MlpSpec(sizes)
    rng = np.random.default_rng(seed)
    return nn.ParamVector(spec, rng.normal(0, 0.7, spec.n_params)), rng


def test_fresh_net_gives_finite_deterministic_scores():
    d = Discriminator(seed=0)
    x = np.random.default_rng(0).normal(size=(3, FEATURE_DIM))
    a, b = d.score(x), d.score(x)
    assert np.all(np.isfinite(a)) and np.array_equal(a, b)


def test_zero_weight_net_outputs_bias():
    spec = nn.MlpSpec((4, 1))
    p = nn.ParamVector(spec, np.array([0, 0, 0, 0, 0.37]))
    assert np.all(predict(p, np.random.default_rng(0).normal(size=(5, 4))) == 0.37)


def test_constant_zero_scores_give_loss_two():
    spec = nn.MlpSpec((4, 1))
    p = nn.ParamVector(spec, np.zeros(spec.n_params))
    loss, _, info = disc_loss_and_grads(p, np.ones((3, 4)), -np.ones((2, 4)), w_gp=0.0)
    assert loss == 2.0 and info["loss_real"] == 1.0 and info["loss_fake"] == 1.0


def test_lsgan_terms_vanish_at_plus_minus_one():
    # affine D(x) = x_0 scores +1 on real and -1 on fake
    spec = nn.MlpSpec((2, 1))
    p = nn.ParamVector(spec, np.array([1.0, 0.0, 0.0]))
    real = np.array([[1.0, 3.0], [1.0, -2.0]])
    fake = np.array([[-1.0, 0.5]])
    _, _, info = disc_loss_and_grads(p, real, fake, w_gp=1.0)
    assert info["loss_real"] == 0.0 and info["loss_fake"] == 0.0
    assert info["grad_penalty"] == pytest.approx(1.0)


def test_penalty_zero_iff_flat_input_gradient():
    spec = nn.MlpSpec((2, 1))
    p = nn.ParamVector(spec, np.array([0.0, 0.0, 1.0]))
    _, _, info = disc_loss_and_grads(p, np.ones((2, 2)), np.zeros((1, 2)), w_gp=1.0)
    assert info["grad_penalty"] == 0.0


def test_empty_batch_rejected():
    p, _ = _small()
    with pytest.raises(ValueError):
        disc_loss_and_grads(p, np.zeros((0, 4)), np.zeros((2, 4)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["input", "params"]))
def test_loss_gradient_matches_finite_differences(seed, penalty):
    p, rng = _small(seed)
    real, fake = rng.normal(size=(3, 4)), rng.normal(size=(2, 4))
    _, grad, _ = disc_loss_and_grads(p, real, fake, 0.8, penalty)
    f = lambda flat: disc_loss_and_grads(nn.ParamVector(p.spec, flat), real, fake, 0.8, penalty)[0]
    assert relative_error(grad.flat, numeric_gradient(f, p.flat, h=1e-5)) <= 1e-4


def test_zero_gradient_update_leaves_params():
    # D = 0 on identical real and fake batches: the two LSGAN pulls on the
    # bias cancel and a zero-weight affine net has no input gradient
    spec = nn.MlpSpec((3, 1))
    p = nn.ParamVector(spec, np.zeros(spec.n_params))
    real = fake = np.zeros((4, 3))
    _, grad, _ = disc_loss_and_grads(p, real, fake, 1.0)
    assert np.all(grad.flat == 0)
    cfg = DiscriminatorConfig(normalize=False)
    new, _ = update(p, cfg, real, fake, nn.Adam(spec.n_params, lr=cfg.lr))
    assert np.max(np.abs(new.flat - p.flat)) <= 1e-12


def test_loss_decreases_on_fixed_batches():
    rng = np.random.default_rng(0)
    real = rng.normal(0.5, 1.0, size=(64, FEATURE_DIM))
    fake = rng.normal(-0.5, 1.0, size=(64, FEATURE_DIM))
    d = Discriminator(DiscriminatorConfig(hidden=(32, 16), lr=1e-3), seed=0)
    losses = [d.train_step(real, fake)["loss"] for _ in range(50)]
    assert losses[-1] < losses[0]


def test_feature_width_is_checked():
    d = Discriminator(seed=0)
    with pytest.raises(ValueError):
        d.score(np.zeros((2, FEATURE_DIM + 1)))
    with pytest.raises(ValueError):
        d.train_step(np.zeros((2, FEATURE_DIM)), np.zeros((2, FEATURE_DIM - 1)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000))
def test_style_of_any_score_is_bounded(seed):
    d = Discriminator(DiscriminatorConfig(hidden=(8,)), seed=seed)
    x = np.random.default_rng(seed).normal(0, 100, size=(16, FEATURE_DIM))
    r = style_reward(d.score(x), RewardWeights())
    assert np.all((r >= 0) & (r <= 1))


def test_config_validation_and_round_trip():
    cfg = DiscriminatorConfig(hidden=(16, 8), penalty="params")
    assert DiscriminatorConfig.from_dict(cfg.to_dict()) == cfg
    for bad in (dict(batch_size=0), dict(w_gp=-1.0), dict(penalty="hinge")):
        with pytest.raises(ValueError):
            DiscriminatorConfig(**bad)
