"""Minimal fully connected network engine.

Provides exactly what the surrogate training needs: a batched forward pass,
reverse-mode parameter gradients, a forward-mode (dual-number style)
derivative with respect to one input coordinate, reverse mode through that
tangent stream (for losses involving the derivative), and Adam.

Parameters are kept as flat lists [W_1..W_K, b_1..b_K] with W_l shaped
(fan_out, fan_in); activations are smooth so all second derivatives needed
by the tangent backward pass exist.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SOFTPLUS_OUTPUT_EPS = 1e-6

HIDDEN_ACTIVATIONS = ("tanh", "softplus", "sigmoid")
OUTPUT_TRANSFORMS = ("identity", "softplus_plus_epsilon")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _act_tanh(z):
    a = np.tanh(z)
    d1 = 1.0 - a * a
    return a, d1, -2.0 * a * d1


def _act_softplus(z):
    s = _sigmoid(z)
    return np.logaddexp(0.0, z), s, s * (1.0 - s)


def _act_sigmoid(z):
    s = _sigmoid(z)
    d1 = s * (1.0 - s)
    return s, d1, d1 * (1.0 - 2.0 * s)


_ACTS = {"tanh": _act_tanh, "softplus": _act_softplus, "sigmoid": _act_sigmoid}


@dataclass(eq=False)
class Network:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "tanh"
    output_transform: str = "identity"

    def __post_init__(self):
        if self.hidden_activation not in _ACTS:
            raise ValueError(f"unknown hidden_activation {self.hidden_activation!r}")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ValueError(f"unknown output_transform {self.output_transform!r}")
        sizes = tuple(int(s) for s in self.layer_sizes)
        for W, b, n_in, n_out in zip(self.weights, self.biases, sizes[:-1], sizes[1:]):
            if W.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ValueError("parameter shapes do not chain with layer_sizes")
        self.layer_sizes = sizes

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


def init_network(layer_sizes, hidden_activation="tanh", output_transform="identity", seed=0) -> Network:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs at least an input and an output size")
    if any(s <= 0 for s in sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (n_in + n_out))
        weights.append(rng.uniform(-limit, limit, size=(n_out, n_in)))
        biases.append(np.zeros(n_out))
    return Network(sizes, weights, biases, hidden_activation, output_transform)


def get_params(net: Network) -> list[np.ndarray]:
    return list(net.weights) + list(net.biases)


def set_params(net: Network, params: list[np.ndarray]) -> None:
    k = len(net.weights)
    net.weights = list(params[:k])
    net.biases = list(params[k:])


def copy_params(params: list[np.ndarray]) -> list[np.ndarray]:
    return [p.copy() for p in params]


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def _check_input(net: Network, X: np.ndarray) -> None:
    if X.shape[1] != net.n_inputs:
        raise ValueError(f"input length {X.shape[1]} does not match network input size {net.n_inputs}")


def _output_transform(net: Network, z: np.ndarray):
    """Returns (y, dy/dz, d2y/dz2) for the output layer transform."""
    if net.output_transform == "identity":
        return z, np.ones_like(z), np.zeros_like(z)
    y, d1, d2 = _act_softplus(z)
    return y + SOFTPLUS_OUTPUT_EPS, d1, d2


def forward(net: Network, x):
    """Affine-then-activation composition; output transform applied at the last layer."""
    X, single = _as_batch(x)
    _check_input(net, X)
    act = _ACTS[net.hidden_activation]
    a = X
    n_layers = len(net.weights)
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        if l < n_layers - 1:
            a = act(z)[0]
        else:
            a = _output_transform(net, z)[0]
    return a[0] if single else a


def _forward_cache(net: Network, X: np.ndarray):
    """Forward pass retaining pre-activations and activations for backprop."""
    act = _ACTS[net.hidden_activation]
    a_list = [X]
    d1_list = []
    n_layers = len(net.weights)
    a = X
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        if l < n_layers - 1:
            a, d1, _ = act(z)
        else:
            a, d1, _ = _output_transform(net, z)
        a_list.append(a)
        d1_list.append(d1)
    return a_list, d1_list


def grad_params(net: Network, x, upstream) -> list[np.ndarray]:
    """Reverse-mode gradients of sum_i(upstream_i . output_i) w.r.t. every parameter.

    Accepts a single input (vector upstream) or a batch (matrix upstream);
    batch contributions are summed. Returns [dW_1..dW_K, db_1..db_K].
    """
    X, _ = _as_batch(x)
    _check_input(net, X)
    U = np.asarray(upstream, dtype=float)
    if U.ndim == 1:
        U = U[None, :] if X.shape[0] == 1 else U[:, None]
    if U.shape != (X.shape[0], net.n_outputs):
        raise ValueError(f"upstream shape {U.shape} does not match ({X.shape[0]}, {net.n_outputs})")
    a_list, d1_list = _forward_cache(net, X)
    dWs = [None] * len(net.weights)
    dbs = [None] * len(net.biases)
    g = U * d1_list[-1]
    for l in range(len(net.weights) - 1, -1, -1):
        dWs[l] = g.T @ a_list[l]
        dbs[l] = g.sum(axis=0)
        if l > 0:
            g = (g @ net.weights[l]) * d1_list[l - 1]
    return dWs + dbs


def grad_input(net: Network, x, upstream) -> np.ndarray:
    """Reverse-mode gradient of (upstream . output) w.r.t. the input vector."""
    X, single = _as_batch(x)
    _check_input(net, X)
    U = np.asarray(upstream, dtype=float)
    if U.ndim == 1:
        U = U[None, :] if X.shape[0] == 1 else U[:, None]
    a_list, d1_list = _forward_cache(net, X)
    g = U * d1_list[-1]
    for l in range(len(net.weights) - 1, 0, -1):
        g = (g @ net.weights[l]) * d1_list[l - 1]
    g = g @ net.weights[0]
    return g[0] if single else g


def forward_with_tangent(net: Network, x, tangent_index: int):
    """Outputs plus exact directional derivative w.r.t. input[tangent_index].

    Forward-mode propagation of a (value, tangent) pair through every layer,
    including the output transform.
    """
    X, single = _as_batch(x)
    _check_input(net, X)
    if not 0 <= tangent_index < net.n_inputs:
        raise IndexError(f"tangent index {tangent_index} out of range for input size {net.n_inputs}")
    act = _ACTS[net.hidden_activation]
    a = X
    a_dot = np.zeros_like(X)
    a_dot[:, tangent_index] = 1.0
    n_layers = len(net.weights)
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        z_dot = a_dot @ W.T
        if l < n_layers - 1:
            a, d1, _ = act(z)
        else:
            a, d1, _ = _output_transform(net, z)
        a_dot = d1 * z_dot
    if single:
        return a[0], a_dot[0]
    return a, a_dot


def dvalue_dtime(net: Network, x, time_index: int) -> float:
    """Exact derivative of the scalar output w.r.t. the time coordinate of one input."""
    if net.n_outputs != 1:
        raise ValueError("dvalue_dtime expects a scalar-output network")
    _, y_dot = forward_with_tangent(net, np.asarray(x, dtype=float), time_index)
    return float(np.asarray(y_dot).reshape(-1)[0])


def grad_params_dual(net: Network, x, tangent_index: int, upstream_y, upstream_ydot) -> list[np.ndarray]:
    """Reverse mode through both the value and tangent streams.

    Gradients of sum_i(upstream_y_i . y_i + upstream_ydot_i . ydot_i) with
    respect to every parameter, where ydot is the forward-mode derivative
    w.r.t. input[tangent_index]. This is the second-order path used by losses
    that penalize the time derivative of the network output.
    """
    X, _ = _as_batch(x)
    _check_input(net, X)
    act = _ACTS[net.hidden_activation]
    n_layers = len(net.weights)

    a_list = [X]
    adot_0 = np.zeros_like(X)
    adot_0[:, tangent_index] = 1.0
    adot_list = [adot_0]
    zdot_list = []
    d1_list = []
    d2_list = []
    a, a_dot = X, adot_0
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W.T + b
        z_dot = a_dot @ W.T
        if l < n_layers - 1:
            a, d1, d2 = act(z)
        else:
            a, d1, d2 = _output_transform(net, z)
        a_dot = d1 * z_dot
        a_list.append(a)
        adot_list.append(a_dot)
        zdot_list.append(z_dot)
        d1_list.append(d1)
        d2_list.append(d2)

    Uy = np.asarray(upstream_y, dtype=float).reshape(X.shape[0], net.n_outputs)
    Ud = np.asarray(upstream_ydot, dtype=float).reshape(X.shape[0], net.n_outputs)

    dWs = [None] * n_layers
    dbs = [None] * n_layers
    ga, gadot = Uy, Ud
    for l in range(n_layers - 1, -1, -1):
        # a_l = f(z_l), adot_l = f'(z_l) * zdot_l
        gz = ga * d1_list[l] + gadot * d2_list[l] * zdot_list[l]
        gzdot = gadot * d1_list[l]
        dWs[l] = gz.T @ a_list[l] + gzdot.T @ adot_list[l]
        dbs[l] = gz.sum(axis=0)
        if l > 0:
            ga = gz @ net.weights[l]
            gadot = gzdot @ net.weights[l]
    return dWs + dbs


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0


def adam_init(params: list[np.ndarray], lr: float, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """One bias-corrected Adam update; returns new parameters, mutates moments in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and Adam state must have the same structure")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    out = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        out.append(p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
    return out


def to_json(net: Network, path=None) -> str:
    """Serialize a network; float precision is full round-trip."""
    doc = {
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation,
        "output_transform": net.output_transform,
        "weights": [W.reshape(-1).tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    text = json.dumps(doc, indent=1)
    if path is not None:
        Path(path).write_text(text)
    return text


def from_json(source) -> Network:
    text = str(source)
    if not text.lstrip().startswith("{"):
        text = Path(source).read_text()
    doc = json.loads(text)
    sizes = tuple(int(s) for s in doc["layer_sizes"])
    weights = [
        np.array(flat, dtype=float).reshape(n_out, n_in)
        for flat, n_in, n_out in zip(doc["weights"], sizes[:-1], sizes[1:])
    ]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    return Network(sizes, weights, biases, doc["hidden_activation"], doc["output_transform"])
