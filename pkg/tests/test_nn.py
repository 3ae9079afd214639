import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmamp import nn
from hmamp.gradcheck import numeric_gradient, relative_error

widths = st.lists(st.integers(1, 8), min_size=2, max_size=4)


def _net(sizes, seed, scale=1.0):
    spec = nn.MlpSpec(tuple(sizes))
    rng = np.random.default_rng(seed)
    return nn.ParamVector(spec, rng.normal(0, scale, spec.n_params)), rng


# init --------------------------------------------------------------------

def test_init_is_deterministic_with_zero_biases():
    spec = nn.MlpSpec((5, 7, 3))
    a, b = nn.init_params(spec, 3), nn.init_params(spec, 3)
    assert np.array_equal(a.flat, b.flat)
    for _, bias in a.layers():
        assert np.all(bias == 0)


def test_init_weights_within_fan_in_bound():
    spec = nn.MlpSpec((4, 25_000, 1))
    for (W, _), fan_in in zip(nn.init_params(spec, 0).layers(), spec.layer_sizes[:-1]):
        assert np.abs(W).max() <= math.sqrt(1.0 / fan_in)


@pytest.mark.parametrize("sizes", [(3,), (3, 0, 1)])
def test_invalid_spec(sizes):
    with pytest.raises(ValueError):
        nn.MlpSpec(sizes)


# forward -----------------------------------------------------------------

def test_affine_net_is_exact():
    p, rng = _net((4, 2), 0)
    (W, b), = p.layers()
    x = rng.normal(size=4)
    assert np.array_equal(nn.forward(p, x), W @ x + b)


def test_elu_values():
    assert nn.elu(np.array(-1.0)) == pytest.approx(math.exp(-1) - 1, abs=1e-15)
    assert nn.elu(np.array(0.0)) == 0.0
    eps = 1e-9
    assert abs(nn.elu(np.array(eps)) - nn.elu(np.array(-eps))) < 3e-9
    assert nn.elu_grad(np.array(1e-12)) == pytest.approx(nn.elu_grad(np.array(-1e-12)))


def test_forward_rejects_wrong_width():
    p, _ = _net((4, 3, 1), 0)
    with pytest.raises(ValueError):
        nn.forward(p, np.zeros(5))


def test_forward_is_pure():
    p, rng = _net((4, 6, 2), 1)
    x = rng.normal(size=(5, 4))
    before = p.flat.copy()
    assert np.array_equal(nn.forward(p, x), nn.forward(p, x))
    assert np.array_equal(p.flat, before)


# backward ----------------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(widths, st.integers(0, 10_000))
def test_backward_params_matches_finite_differences(sizes, seed):
    p, rng = _net(sizes, seed)
    x = rng.normal(size=(3, p.spec.in_dim))
    w = rng.normal(size=(3, p.spec.out_dim))
    _, fc = nn.forward(p, x, cache=True)
    analytic = nn.backward_params(fc, w).flat
    numeric = numeric_gradient(
        lambda f: np.sum(w * nn.forward(nn.ParamVector(p.spec, f), x)), p.flat)
    assert relative_error(analytic, numeric) <= 1e-5


def test_backward_zero_output_grad():
    p, rng = _net((3, 4, 2), 0)
    _, fc = nn.forward(p, rng.normal(size=(2, 3)), cache=True)
    assert np.all(nn.backward_params(fc, np.zeros((2, 2))).flat == 0)


def test_affine_bias_gradient_is_output_grad():
    p, rng = _net((3, 2), 0)
    _, fc = nn.forward(p, rng.normal(size=(1, 3)), cache=True)
    g = np.array([[0.7, -1.3]])
    (w_sl, _, b_sl), = p.spec.layout()
    assert np.array_equal(nn.backward_params(fc, g).flat[b_sl], g[0])


# input gradient ----------------------------------------------------------

def test_affine_input_gradient_is_weight_row():
    p, rng = _net((5, 1), 0)
    (W, _), = p.layers()
    assert np.array_equal(nn.input_gradient(p, rng.normal(size=5)), W[0])


@settings(max_examples=50, deadline=None)
@given(widths, st.integers(0, 10_000))
def test_input_gradient_matches_finite_differences(sizes, seed):
    p, rng = _net(sizes[:-1] + [1], seed)
    x = rng.normal(size=p.spec.in_dim)
    numeric = numeric_gradient(lambda v: float(nn.forward(p, v)[0]), x)
    assert relative_error(nn.input_gradient(p, x), numeric) <= 1e-5


def test_input_gradient_in_linear_regime_is_weight_product():
    spec = nn.MlpSpec((3, 4, 1))
    rng = np.random.default_rng(0)
    W1 = np.abs(rng.normal(size=(4, 3)))
    W2 = rng.normal(size=(1, 4))
    flat = np.concatenate([W1.ravel(), np.full(4, 10.0), W2.ravel(), [0.0]])
    p = nn.ParamVector(spec, flat)
    x = np.abs(rng.normal(size=3))  # all pre-activations positive
    assert np.allclose(nn.input_gradient(p, x), (W2 @ W1)[0], atol=1e-14)


def test_input_gradient_needs_scalar_output():
    p, _ = _net((3, 2), 0)
    with pytest.raises(ValueError):
        nn.input_gradient(p, np.zeros(3))


# double backprop ---------------------------------------------------------

def test_affine_penalty_closed_form():
    p, rng = _net((4, 1), 0)
    (W, _), = p.layers()
    pen, grad = nn.grad_penalty_backward(p, rng.normal(size=(1, 4)))
    (w_sl, _, b_sl), = p.spec.layout()
    assert pen[0] == pytest.approx(np.sum(W * W), rel=1e-14)
    assert np.allclose(grad.flat[w_sl], 2 * W.ravel(), rtol=1e-14)
    assert np.all(grad.flat[b_sl] == 0)


def test_affine_penalty_scales_quadratically():
    p, rng = _net((4, 1), 0)
    x = rng.normal(size=(1, 4))
    scaled = p.copy()
    (w_sl, _, _), = p.spec.layout()
    scaled.flat[w_sl] *= 3.0
    assert nn.grad_penalty_backward(scaled, x)[0][0] == pytest.approx(
        9 * nn.grad_penalty_backward(p, x)[0][0], rel=1e-13)


@settings(max_examples=100, deadline=None)
@given(widths, st.integers(0, 10_000))
def test_penalty_gradient_matches_finite_differences(sizes, seed):
    p, rng = _net(sizes[:-1] + [1], seed)
    x = rng.normal(size=(2, p.spec.in_dim))
    _, grad = nn.grad_penalty_backward(p, x)

    def penalty(flat):
        g = nn.input_gradient(nn.ParamVector(p.spec, flat), x)
        return float(np.sum(g * g))

    assert relative_error(grad.flat, numeric_gradient(penalty, p.flat)) <= 1e-4


def test_param_gradient_penalty_variant():
    p, rng = _net((3, 4, 1), 2)
    x = rng.normal(size=(2, 3))
    _, grad = nn.param_grad_norm_penalty(p, x)

    def penalty(flat):
        q = nn.ParamVector(p.spec, flat)
        total = 0.0
        for xk in x:
            _, fc = nn.forward(q, xk[None], cache=True)
            v = nn.backward_params(fc, np.ones((1, 1))).flat
            total += v @ v
        return total

    assert relative_error(grad.flat, numeric_gradient(penalty, p.flat, h=1e-5)) <= 1e-4


# Gaussian head -----------------------------------------------------------

def test_zero_std_sample_is_mean():
    head = nn.GaussianPolicyHead(np.array([0.3, -1.0]), np.array([-60.0, -60.0]))
    action, _ = nn.policy_sample(head, np.random.default_rng(0))
    assert np.allclose(action, head.mean, atol=1e-20)


def test_log_prob_at_mean_unit_std():
    head = nn.GaussianPolicyHead(np.zeros(3), np.zeros(3))
    lp, _ = nn.log_prob_and_entropy(head, np.zeros(3))
    assert lp == pytest.approx(-1.5 * math.log(2 * math.pi), rel=1e-15)


def test_sample_log_prob_agrees_with_density():
    rng = np.random.default_rng(1)
    head = nn.GaussianPolicyHead(rng.normal(size=3), rng.normal(-0.5, 0.3, 3))
    action, lp = nn.policy_sample(head, rng)
    assert lp == pytest.approx(nn.log_prob_and_entropy(head, action)[0], rel=1e-13)


def test_empirical_mean_within_three_sigma():
    n = 100_000
    head = nn.GaussianPolicyHead(np.tile([0.5, -0.2], (n, 1)), np.log([0.3, 1.2]))
    actions, _ = nn.policy_sample(head, np.random.default_rng(2))
    assert np.all(np.abs(actions.mean(axis=0) - [0.5, -0.2]) <= 3 * np.array([0.3, 1.2]) / math.sqrt(n))


def test_entropy_closed_form_and_monotone():
    _, h = nn.log_prob_and_entropy(nn.GaussianPolicyHead(np.zeros(1), np.zeros(1)), np.zeros(1))
    assert h == pytest.approx(0.5 * math.log(2 * math.pi * math.e), rel=1e-15)
    ents = [nn.log_prob_and_entropy(nn.GaussianPolicyHead(np.zeros(1), np.log([s])), np.zeros(1))[1]
            for s in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(ents) > 0)


def test_log_prob_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    mean, log_std, action = rng.normal(size=3), rng.normal(-0.3, 0.2, 3), rng.normal(size=3)
    d_mean, d_log_std = nn.gaussian_log_prob_grads(nn.GaussianPolicyHead(mean, log_std), action)
    f_mean = lambda m: nn.log_prob_and_entropy(nn.GaussianPolicyHead(m, log_std), action)[0]
    f_std = lambda s: nn.log_prob_and_entropy(nn.GaussianPolicyHead(mean, s), action)[0]
    assert relative_error(d_mean, numeric_gradient(f_mean, mean)) <= 1e-6
    assert relative_error(d_log_std, numeric_gradient(f_std, log_std)) <= 1e-6


# optimizer and checkpoints -----------------------------------------------

def test_adam_zero_gradient_is_stationary():
    x = np.array([1.0, -2.0])
    opt = nn.Adam(2, lr=1e-3)
    for _ in range(10):
        opt.step(x, np.zeros(2))
    assert np.array_equal(x, [1.0, -2.0])


def test_adam_minimizes_quadratic():
    x = np.array([3.0, -4.0])
    opt = nn.Adam(2, lr=0.05)
    for _ in range(2000):
        opt.step(x, 2 * x)
    assert np.linalg.norm(x) < 1e-2


def test_checkpoint_round_trip(tmp_path):
    p, _ = _net((4, 5, 2), 0)
    path = nn.save_checkpoint(tmp_path / "net.ckpt", p, seed=3, step=17, extra={"note": "x"})
    q, header = nn.load_checkpoint(path, p.spec)
    assert np.array_equal(p.flat, q.flat)
    assert header["seed"] == 3 and header["step"] == 17 and header["note"] == "x"
    assert header["layer_sizes"] == [4, 5, 2]


def test_checkpoint_shape_mismatch(tmp_path):
    p, _ = _net((4, 5, 2), 0)
    path = nn.save_checkpoint(tmp_path / "net.ckpt", p)
    with pytest.raises(ValueError, match="do not match"):
        nn.load_checkpoint(path, nn.MlpSpec((4, 6, 2)))


def test_checkpoint_truncated(tmp_path):
    p, _ = _net((4, 5, 2), 0)
    path = nn.save_checkpoint(tmp_path / "net.ckpt", p)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        nn.load_checkpoint(path)
