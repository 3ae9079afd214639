"""Small fixed-topology MLPs with hand-written gradients.

Everything here works on batches: inputs are ``(N, d_in)`` arrays and the
parameter gradients returned are summed over the batch. Hidden layers use
ELU, the output layer is affine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "MlpSpec",
    "ParamVector",
    "ForwardCache",
    "GaussianPolicyHead",
    "Adam",
    "elu",
    "elu_grad",
    "init_params",
    "forward",
    "backward_params",
    "input_gradient",
    "grad_penalty_backward",
    "param_grad_norm_penalty",
    "policy_sample",
    "log_prob_and_entropy",
    "gaussian_log_prob_grads",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = "HMAMP-PARAMS v1"


def elu(x):
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def _elu_second(x):
    return np.where(x > 0.0, 0.0, np.exp(np.minimum(x, 0.0)))


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths from input to output, e.g. ``(14, 128, 64, 3)``."""

    layer_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if any(s <= 0 for s in sizes):
            raise ValueError(f"layer widths must be positive, got {sizes}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def in_dim(self):
        return self.layer_sizes[0]

    @property
    def out_dim(self):
        return self.layer_sizes[-1]

    def layout(self):
        """``[(w_slice, w_shape, b_slice), ...]`` per affine layer."""
        out = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = slice(offset, offset + fan_in * fan_out)
            offset = w.stop
            b = slice(offset, offset + fan_out)
            offset = b.stop
            out.append((w, (fan_out, fan_in), b))
        return out

    @property
    def n_params(self):
        return sum(a * b + b for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]))


@dataclass
class ParamVector:
    """Flat float64 storage for all weights and biases of one network."""

    spec: MlpSpec
    flat: np.ndarray

    def __post_init__(self):
        self.flat = np.asarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.spec.n_params,):
            raise ValueError(
                f"parameter vector has shape {self.flat.shape}, spec needs ({self.spec.n_params},)"
            )

    def layers(self):
        """Views ``[(W, b), ...]`` into ``flat``; W has shape (out, in)."""
        return [(self.flat[w].reshape(shape), self.flat[b]) for w, shape, b in self.spec.layout()]

    def copy(self):
        return ParamVector(self.spec, self.flat.copy())

    def zeros_like(self):
        return ParamVector(self.spec, np.zeros_like(self.flat))


def init_params(spec, seed):
    """Uniform weights in +-sqrt(1/fan_in), zero biases."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.n_params)
    for w, (fan_out, fan_in), _ in spec.layout():
        bound = np.sqrt(1.0 / fan_in)
        flat[w] = rng.uniform(-bound, bound, size=fan_out * fan_in)
    return ParamVector(spec, flat)


@dataclass
class ForwardCache:
    params: ParamVector
    inputs: list = field(default_factory=list)  # input to each affine layer
    pre: list = field(default_factory=list)  # pre-activation of each affine layer
    output: np.ndarray = None


def forward(params, x, cache=False):
    """Evaluate the network on a batch ``x`` of shape (N, d_in) or (d_in,)."""
    spec = params.spec
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[-1] != spec.in_dim:
        raise ValueError(f"input width {h.shape[-1]} does not match spec width {spec.in_dim}")
    fc = ForwardCache(params) if cache else None
    layers = params.layers()
    for i, (W, b) in enumerate(layers):
        z = h @ W.T + b
        if fc is not None:
            fc.inputs.append(h)
            fc.pre.append(z)
        h = elu(z) if i < len(layers) - 1 else z
    out = h[0] if single else h
    if fc is not None:
        fc.output = h
        return out, fc
    return out


def backward_params(fc, output_grad):
    """Gradient of sum_n <output_grad_n, output_n> w.r.t. the parameters."""
    params = fc.params
    g = np.asarray(output_grad, dtype=np.float64).reshape(fc.output.shape)
    grad = np.zeros_like(params.flat)
    layers = params.layers()
    layout = params.spec.layout()
    dz = g
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        w_sl, shape, b_sl = layout[i]
        grad[w_sl] = (dz.T @ fc.inputs[i]).ravel()
        grad[b_sl] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ W) * elu_grad(fc.pre[i - 1])
    return ParamVector(params.spec, grad)


def _backward_input(params, pre):
    """Reverse sweep for a scalar-output net. Returns (input grad, deltas, gs)."""
    layers = params.layers()
    n = pre[0].shape[0]
    delta = np.ones((n, 1))
    deltas = [None] * len(layers)
    gs = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        deltas[i] = delta
        g = delta @ W
        gs[i] = g  # gradient w.r.t. the input of layer i
        if i > 0:
            delta = g * elu_grad(pre[i - 1])
    return gs[0], deltas, gs


def input_gradient(params, x):
    """d output / d input for a scalar-output net, batched like ``forward``."""
    if params.spec.out_dim != 1:
        raise ValueError("input_gradient needs a scalar-output network")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    _, fc = forward(params, x[None, :] if single else x, cache=True)
    g0, _, _ = _backward_input(params, fc.pre)
    return g0[0] if single else g0


def grad_penalty_backward(params, x, weights=None):
    """Input-gradient penalty and its exact parameter gradient.

    Returns ``(penalty, grad)`` where ``penalty[n] = ||d D(x_n) / d x_n||^2``
    per sample and ``grad`` is the parameter gradient of
    ``sum_n weights[n] * penalty[n]`` (``weights`` defaults to ones).

    The gradient is obtained by differentiating the reverse sweep itself:
    the cotangent of the input gradient is pushed back through the reverse
    sweep, which produces cotangents on the forward pre-activations (via
    ELU''), and those are then pushed back through the forward pass.
    """
    if params.spec.out_dim != 1:
        raise ValueError("grad_penalty_backward needs a scalar-output network")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    w_n = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    _, fc = forward(params, x, cache=True)
    g0, deltas, gs = _backward_input(params, fc.pre)
    penalty = np.sum(g0 * g0, axis=1)

    layers = params.layers()
    layout = params.spec.layout()
    L = len(layers)
    grad = np.zeros_like(params.flat)

    # Adjoint of the reverse sweep, walking it from the input side back up.
    z_bar = [np.zeros_like(z) for z in fc.pre]
    g_bar = 2.0 * g0 * w_n[:, None]
    for i in range(L):
        W, _ = layers[i]
        w_sl, shape, _ = layout[i]
        # g_i = delta_i @ W_i
        grad[w_sl] += (deltas[i].T @ g_bar).ravel()
        delta_bar = g_bar @ W.T
        if i == L - 1:
            break
        # delta_i = g_{i+1} * elu'(z_i)
        a = elu_grad(fc.pre[i])
        z_bar[i] += delta_bar * gs[i + 1] * _elu_second(fc.pre[i])
        g_bar = delta_bar * a

    # Push pre-activation cotangents back through the forward pass.
    h_bar = np.zeros_like(fc.pre[L - 1])
    for i in range(L - 1, -1, -1):
        W, _ = layers[i]
        w_sl, shape, b_sl = layout[i]
        dz = z_bar[i] + (h_bar * elu_grad(fc.pre[i]) if i < L - 1 else h_bar)
        grad[w_sl] += (dz.T @ fc.inputs[i]).ravel()
        grad[b_sl] += dz.sum(axis=0)
        h_bar = dz @ W
    return penalty, ParamVector(params.spec, grad)


def param_grad_norm_penalty(params, x, weights=None):
    """Penalty on ||d D / d params||^2 per sample, with its parameter gradient.

    Ablation variant of the gradient penalty that differentiates w.r.t. the
    parameters instead of the input. Cost is O(N * n_params) memory, so it is
    only meant for small networks. The gradient is computed by central
    differences of the per-sample parameter gradients along the penalty
    direction (a Hessian-vector product), which is accurate to ~1e-7.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n = x.shape[0]
    w_n = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)

    def sample_grad(p, xk):
        _, fc = forward(p, xk[None, :], cache=True)
        return backward_params(fc, np.ones((1, 1))).flat

    penalty = np.zeros(n)
    grad = np.zeros_like(params.flat)
    eps = 1e-6
    for k in range(n):
        v = sample_grad(params, x[k])
        penalty[k] = v @ v
        scale = eps / max(np.linalg.norm(v), 1e-12)
        plus = ParamVector(params.spec, params.flat + scale * v)
        minus = ParamVector(params.spec, params.flat - scale * v)
        hv = (sample_grad(plus, x[k]) - sample_grad(minus, x[k])) / (2 * scale)
        grad += 2.0 * w_n[k] * hv
    return penalty, ParamVector(params.spec, grad)


@dataclass
class GaussianPolicyHead:
    """Diagonal Gaussian with a state-independent log standard deviation."""

    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self):
        return np.exp(self.log_std)


_LOG_2PI = np.log(2.0 * np.pi)


def policy_sample(head, rng):
    mean = np.asarray(head.mean, dtype=np.float64)
    eps = rng.standard_normal(mean.shape)
    action = mean + head.std * eps
    log_prob = np.sum(-0.5 * eps * eps - head.log_std - 0.5 * _LOG_2PI, axis=-1)
    return action, log_prob


def log_prob_and_entropy(head, action):
    z = (np.asarray(action) - head.mean) / head.std
    log_prob = np.sum(-0.5 * z * z - head.log_std - 0.5 * _LOG_2PI, axis=-1)
    entropy = np.sum(head.log_std + 0.5 * (1.0 + _LOG_2PI), axis=-1)
    return log_prob, entropy


def gaussian_log_prob_grads(head, action):
    """(d log_prob / d mean, d log_prob / d log_std), per sample."""
    std = head.std
    diff = np.asarray(action) - head.mean
    d_mean = diff / std**2
    d_log_std = (diff / std) ** 2 - 1.0
    return d_mean, d_log_std


class Adam:
    """Adam on a flat numpy array, updated in place."""

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, x, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        x -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return x


def save_checkpoint(path, params, seed=0, step=0, extra=None):
    """Write ``params`` as one JSON header line followed by raw float64 LE.

    Header keys: ``magic``, ``layer_sizes``, ``n_params``, ``seed``,
    ``step`` plus anything in ``extra``. Extra arrays (e.g. a policy
    log-std) can be stored by passing them in ``extra`` as lists.
    """
    header = {
        "magic": CHECKPOINT_MAGIC,
        "layer_sizes": list(params.spec.layer_sizes),
        "n_params": int(params.spec.n_params),
        "seed": int(seed),
        "step": int(step),
    }
    if extra:
        header.update(extra)
    path = Path(path)
    with path.open("wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        fh.write(params.flat.astype("<f8").tobytes())
    return path


def load_checkpoint(path, expected_spec=None):
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline().decode("ascii"))
        payload = fh.read()
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    spec = MlpSpec(tuple(header["layer_sizes"]))
    if expected_spec is not None and spec != expected_spec:
        raise ValueError(
            f"{path}: checkpoint layers {spec.layer_sizes} do not match {expected_spec.layer_sizes}"
        )
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if flat.size != header["n_params"]:
        raise ValueError(f"{path}: truncated payload ({flat.size} of {header['n_params']} values)")
    return ParamVector(spec, flat), header
