"""Minimal dense-network engine: forward/backward, Adam, seeded training.

Everything runs in float64 numpy so analytic gradients can be checked against
central finite differences at tight tolerances, and so repeated runs with the
same seed produce bit-identical parameters.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .errors import (
    BadMagicError,
    DimensionMismatchError,
    NonFiniteActivationError,
    ShapeMismatchError,
    TruncatedFileError,
)
from .validation import as_float_matrix

NET_MAGIC = b"NET1"

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def norm_cdf(x):
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=np.float64) / _SQRT2))


def gelu(x):
    """Exact GELU, x * Phi(x) with Phi the standard normal CDF."""
    x = np.asarray(x, dtype=np.float64)
    return x * norm_cdf(x)


def gelu_prime(x):
    """d/dx of the exact GELU: Phi(x) + x * phi(x)."""
    x = np.asarray(x, dtype=np.float64)
    return norm_cdf(x) + x * _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_prime(x):
    return (np.asarray(x, dtype=np.float64) > 0.0).astype(np.float64)


ACTIVATIONS = {"relu": (relu, relu_prime), "gelu": (gelu, gelu_prime)}
HEADS = ("softmax_classifier", "linear_reconstruction")


def softmax(logits, axis=-1):
    """Numerically stable softmax (max subtraction)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture description: widths, hidden activation, head, init seed."""

    layer_sizes: tuple
    activation: str = "gelu"
    head: str = "softmax_classifier"
    seed: int = 0

    def __post_init__(self):
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output width")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.head not in HEADS:
            raise ValueError(f"unknown head {self.head!r}")
        object.__setattr__(self, "layer_sizes", tuple(int(s) for s in self.layer_sizes))


@dataclass(eq=False)
class Network:
    """Dense layers; weights[l] has shape (fan_in, fan_out)."""

    weights: list
    biases: list
    spec: NetworkSpec

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def output_dim(self):
        return self.weights[-1].shape[1]

    def params(self):
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        return out

    def copy(self):
        return Network(
            [W.copy() for W in self.weights], [b.copy() for b in self.biases], self.spec
        )


def init_network(spec):
    """Seeded initialization: weights uniform in +-1/sqrt(fan_in), zero biases."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, spec)


@dataclass(eq=False)
class ForwardTrace:
    """Per-layer pre/post activations retained for backward and saliency."""

    inputs: np.ndarray
    pre: list
    post: list
    logits: np.ndarray
    probs: np.ndarray | None
    single: bool


def forward(net, x):
    """Run the network; returns a ForwardTrace with logits (and probs for
    classifier heads, summing to 1 within 1e-12)."""
    single = np.ndim(x) == 1
    a = as_float_matrix(x, d=net.input_dim, name="x")
    act, _ = ACTIVATIONS[net.spec.activation]
    pre, post = [], []
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W + b
        if not np.isfinite(z).all():
            raise NonFiniteActivationError(f"non-finite pre-activation at layer {l}")
        pre.append(z)
        if l < net.n_layers - 1:
            a = act(z)
            post.append(a)
    logits = pre[-1]
    probs = softmax(logits) if net.spec.head == "softmax_classifier" else None
    return ForwardTrace(as_float_matrix(x, d=net.input_dim), pre, post, logits, probs, single)


def backward(net, trace, grad_logits, need_param_grads=True):
    """Backpropagate a logit-space gradient; returns (param_grads, input_grad).

    ``param_grads`` is None when not requested (the attack hot path only needs
    the input gradient).
    """
    _, act_prime = ACTIVATIONS[net.spec.activation]
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != trace.logits.shape:
        raise ShapeMismatchError(f"grad_logits shape {g.shape} != logits {trace.logits.shape}")
    param_grads = [None] * (2 * net.n_layers) if need_param_grads else None
    for l in range(net.n_layers - 1, -1, -1):
        a_prev = trace.inputs if l == 0 else trace.post[l - 1]
        if need_param_grads:
            param_grads[2 * l] = a_prev.T @ g
            param_grads[2 * l + 1] = g.sum(axis=0)
        g = g @ net.weights[l].T
        if l > 0:
            g = g * act_prime(trace.pre[l - 1])
    input_grad = g[0] if trace.single else g
    return param_grads, input_grad


def cross_entropy(trace, targets):
    """Mean -log p[target] computed from logits via log-sum-exp."""
    logits = trace.logits
    targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(logits.shape[0]), targets]))


def loss_and_grads(net, x, target, need_param_grads=True):
    """Loss, parameter gradients and input gradient for one example or batch.

    Classifier heads take integer class targets and use cross-entropy;
    reconstruction heads take a target vector and use mean squared error
    (mean over output dimensions).
    """
    trace = forward(net, x)
    n = trace.logits.shape[0]
    if net.spec.head == "softmax_classifier":
        targets = np.atleast_1d(np.asarray(target, dtype=np.int64))
        if targets.shape[0] != n:
            raise ShapeMismatchError(f"{targets.shape[0]} targets for {n} examples")
        loss = cross_entropy(trace, targets)
        grad_logits = trace.probs.copy()
        grad_logits[np.arange(n), targets] -= 1.0
        grad_logits /= n
    else:
        target_arr = as_float_matrix(target, d=net.output_dim, name="target")
        if target_arr.shape[0] != n:
            raise ShapeMismatchError(f"{target_arr.shape[0]} targets for {n} examples")
        diff = trace.logits - target_arr
        loss = float(np.mean(diff * diff))
        grad_logits = 2.0 * diff / diff.size
    param_grads, input_grad = backward(net, trace, grad_logits, need_param_grads)
    return loss, param_grads, input_grad


@dataclass(eq=False)
class AdamState:
    """Adam accumulators with the optimizer's published default constants."""

    m: list
    v: list
    t: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


def init_adam(net, learning_rate=1e-3):
    shapes = [p.shape for p in net.params()]
    return AdamState(
        m=[np.zeros(s) for s in shapes],
        v=[np.zeros(s) for s in shapes],
        learning_rate=learning_rate,
    )


def adam_step(state, net, grads):
    """One bias-corrected Adam update, applied in place; returns (net, state)."""
    params = net.params()
    if len(grads) != len(params):
        raise ShapeMismatchError(f"{len(grads)} gradient arrays for {len(params)} parameters")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ShapeMismatchError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / correction1
        v_hat = v / correction2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps_hat)
    return net, state


def accuracy(net, X, y):
    trace = forward(net, X)
    return float(np.mean(trace.logits.argmax(axis=1) == np.asarray(y)))


def network_to_bytes(net):
    """NET1 checkpoint payload: spec header then parameters, little-endian f8."""
    spec = net.spec
    header = [float(len(spec.layer_sizes))]
    header.extend(float(s) for s in spec.layer_sizes)
    header.append(float(list(ACTIVATIONS).index(spec.activation)))
    header.append(float(HEADS.index(spec.head)))
    header.append(float(spec.seed))
    parts = [NET_MAGIC, np.array(header, dtype="<f8").tobytes()]
    parts.extend(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.params())
    return b"".join(parts)


def save_network(net, path):
    with open(path, "wb") as fh:
        fh.write(network_to_bytes(net))


def network_from_bytes(raw):
    if raw[:4] != NET_MAGIC:
        raise BadMagicError(f"expected {NET_MAGIC!r} header, got {raw[:4]!r}")
    if len(raw) < 12:
        raise TruncatedFileError("NET1 file ends inside the header")
    n_sizes = int(struct.unpack_from("<d", raw, 4)[0])
    header_len = 1 + n_sizes + 3
    if len(raw) < 4 + 8 * header_len:
        raise TruncatedFileError("NET1 file ends inside the spec header")
    header = np.frombuffer(raw, dtype="<f8", count=header_len, offset=4)
    sizes = tuple(int(s) for s in header[1 : 1 + n_sizes])
    activation = list(ACTIVATIONS)[int(header[1 + n_sizes])]
    head = HEADS[int(header[2 + n_sizes])]
    seed = int(header[3 + n_sizes])
    spec = NetworkSpec(sizes, activation, head, seed)
    n_params = sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))
    body = np.frombuffer(raw, dtype="<f8", offset=4 + 8 * header_len)
    if body.size < n_params:
        raise TruncatedFileError(f"NET1 file holds {body.size} parameters, expected {n_params}")
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(body[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out).copy())
        pos += fan_in * fan_out
        biases.append(body[pos : pos + fan_out].copy())
        pos += fan_out
    return Network(weights, biases, spec)


def load_network(path):
    with open(path, "rb") as fh:
        return network_from_bytes(fh.read())


def _minibatches(n, batch_size, rng):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


class DenseClassifier(BaseEstimator, ClassifierMixin):
    """Softmax MLP trained with Adam; deterministic for a fixed seed.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers.
    activation : {"gelu", "relu"}
    epochs, batch_size, learning_rate : training schedule.
    seed : int
        Drives both parameter initialization and the epoch shuffles.
    """

    def __init__(
        self,
        hidden_layer_sizes=(256, 256),
        activation="gelu",
        epochs=10,
        batch_size=64,
        learning_rate=1e-3,
        seed=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y):
        X = as_float_matrix(X, name="X")
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ShapeMismatchError(f"labels shape {y.shape} for {X.shape[0]} examples")
        n_classes = int(y.max()) + 1
        sizes = (X.shape[1], *self.hidden_layer_sizes, n_classes)
        spec = NetworkSpec(sizes, self.activation, "softmax_classifier", self.seed)
        net = init_network(spec)
        state = init_adam(net, self.learning_rate)
        rng = np.random.default_rng(self.seed)
        for _ in range(self.epochs):
            for idx in _minibatches(X.shape[0], self.batch_size, rng):
                _, grads, _ = loss_and_grads(net, X[idx], y[idx])
                adam_step(state, net, grads)
        self.network_ = net
        self.classes_ = np.arange(n_classes)
        self.train_accuracy_ = accuracy(net, X, y)
        return self

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise NotFittedError("DenseClassifier is not fitted yet")

    def decision_function(self, X):
        self._check_fitted()
        single = np.ndim(X) == 1
        trace = forward(self.network_, X)
        return trace.logits[0] if single else trace.logits

    def predict_proba(self, X):
        logits = self.decision_function(X)
        return softmax(logits)

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=-1)
