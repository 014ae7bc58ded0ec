"""Disjoint surrogate training with kinetic-energy consistency.

Two decoupled networks are fit by alternating full-batch Adam phases: a
displacement network whose time derivative at t = 0 is the impact velocity,
and a strictly positive mass network. Each phase holds the other network's
prediction fixed; the kinetic energy relation E = 0.5 * m * v0**2 couples
them inside both hybrid losses and defines the inferred impact energy.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn

# Outer alternation stops once both phase-end losses improve by less than this.
OUTER_REL_TOL = 1e-8

PHASE_DISP = "disp"
PHASE_MASS = "mass"


class TrainingError(RuntimeError):
    """Raised when optimization produces a non-finite loss."""


@dataclass
class LossWeights:
    """Relative weights of the data and physics terms in both phases."""

    lambda_v0: float = 1e-4
    lambda_ic: float = 1e-6
    lambda_ke: float = 1e-4
    lambda_m: float = 1e-6
    lambda_ke_m: float = 1e-4

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class TrainConfig:
    max_epochs_per_phase: int = 10_000
    max_cycles: int = 10
    patience: int = 500
    lr_disp: float = 1e-2
    lr_mass: float = 1e-3
    seed: int = 0
    disp_hidden: tuple[int, ...] = (256, 256, 256)
    disp_activation: str = "tanh"
    mass_hidden: tuple[int, ...] = (64, 64, 64)
    mass_activation: str = "softplus"
    # Internal unit of the displacement network's time input. Impact velocities
    # are a few m/s while healthy post-init derivatives are ~1e-2, so training
    # on a rescaled time axis keeps the derivative target within reach of small
    # weight updates; the scale is folded into the first-layer time column at
    # train end so serialized networks differentiate in physical seconds.
    time_input_scale: float = 10.0

    def __post_init__(self):
        if self.max_epochs_per_phase <= 0 or self.max_cycles <= 0 or self.patience <= 0:
            raise ValueError("epoch, cycle, and patience counts must be positive")
        if self.lr_disp <= 0 or self.lr_mass <= 0:
            raise ValueError("learning rates must be positive")
        if self.time_input_scale <= 0:
            raise ValueError("time_input_scale must be positive")
        self.disp_hidden = tuple(int(h) for h in self.disp_hidden)
        self.mass_hidden = tuple(int(h) for h in self.mass_hidden)


@dataclass
class HistoryRow:
    cycle: int
    phase: str
    epoch: int
    total: float
    parts: tuple[float, ...]


@dataclass
class TrainState:
    disp_net: nn.Network
    mass_net: nn.Network
    adam_disp: nn.AdamState
    adam_mass: nn.AdamState
    fixed_mass: np.ndarray
    fixed_velocity: np.ndarray
    cycle: int
    history: list[HistoryRow]
    best_disp_total: float
    best_mass_total: float
    n_features: int


@dataclass
class Prediction:
    """Inferred impactor mass, impact velocity, and the energy they imply."""

    mass_kg: float
    v0_mps: float
    energy_j: float

    def __post_init__(self):
        if not self.mass_kg > 0:
            raise ValueError("predicted mass must be positive")
        if self.energy_j != kinetic_energy(self.mass_kg, self.v0_mps):
            raise ValueError("energy_j must equal 0.5 * mass_kg * v0_mps**2")


def kinetic_energy(mass_kg: float, v0_mps: float) -> float:
    """0.5 * m * v0**2; even in the velocity sign."""
    if not mass_kg > 0:
        raise ValueError("mass must be positive")
    return 0.5 * mass_kg * v0_mps * v0_mps


def _with_time(features: np.ndarray, t: float = 0.0) -> np.ndarray:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    return np.concatenate([X, np.full((X.shape[0], 1), t)], axis=1)


def predict_velocity(disp_net: nn.Network, features) -> float:
    """Velocity as the time derivative of the displacement surrogate at t = 0.

    May be negative; the kinetic energy relation is even in velocity so no
    positivity constraint applies.
    """
    row = np.asarray(features, dtype=float)
    if row.ndim != 1:
        raise ValueError("predict_velocity expects a single feature vector")
    return nn.dvalue_dtime(disp_net, _with_time(row)[0], row.size)


def predict_velocity_batch(disp_net: nn.Network, features: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    _, y_dot = nn.forward_with_tangent(disp_net, _with_time(X), X.shape[1])
    return y_dot[:, 0]


def _disp_eval(disp_net, X):
    Xt = _with_time(X)
    w, v0 = nn.forward_with_tangent(disp_net, Xt, X.shape[1])
    return Xt, w[:, 0], v0[:, 0]


def _check_batch(*arrays):
    n = len(np.atleast_2d(arrays[0]))
    for a in arrays[1:]:
        if np.asarray(a).shape[0] != n:
            raise ValueError("batch arrays must have equal lengths")
    return n


def loss_disp(disp_net, X, v0_obs, e_meas, m_bar, weights: LossWeights):
    """Displacement-phase hybrid loss: (total, unweighted parts)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    v0_obs = np.asarray(v0_obs, dtype=float)
    e_meas = np.asarray(e_meas, dtype=float)
    m_bar = np.asarray(m_bar, dtype=float)
    _check_batch(X, v0_obs, e_meas, m_bar)
    if np.any(m_bar <= 0):
        raise ValueError("fixed mass values must be positive")
    _, w, v0 = _disp_eval(disp_net, X)
    l_v0 = float(np.mean((v0_obs - v0) ** 2))
    l_ic = float(np.mean(w**2))
    l_ke = float(np.mean((e_meas - 0.5 * m_bar * v0**2) ** 2))
    total = weights.lambda_v0 * l_v0 + weights.lambda_ic * l_ic + weights.lambda_ke * l_ke
    return total, {"L_v0": l_v0, "L_IC": l_ic, "L_KE": l_ke}


def loss_mass(mass_net, X, m_obs, e_meas, v_bar, weights: LossWeights):
    """Mass-phase hybrid loss: (total, unweighted parts)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m_obs = np.asarray(m_obs, dtype=float)
    e_meas = np.asarray(e_meas, dtype=float)
    v_bar = np.asarray(v_bar, dtype=float)
    _check_batch(X, m_obs, e_meas, v_bar)
    m_pred = np.atleast_2d(nn.forward(mass_net, X))[:, 0]
    l_m = float(np.mean((m_obs - m_pred) ** 2))
    l_ke_m = float(np.mean((e_meas - 0.5 * m_pred * v_bar**2) ** 2))
    total = weights.lambda_m * l_m + weights.lambda_ke_m * l_ke_m
    return total, {"L_m": l_m, "L_KE_m": l_ke_m}


def _loss_disp_with_grads(disp_net, X, v0_obs, e_meas, m_bar, weights, time_scale=1.0):
    # During training the time input is internally rescaled; the physical
    # velocity is time_scale times the network's raw derivative.
    n = X.shape[0]
    Xt = _with_time(X)
    w, v_raw = nn.forward_with_tangent(disp_net, Xt, X.shape[1])
    w = w[:, 0]
    v0 = time_scale * v_raw[:, 0]
    ke_resid = e_meas - 0.5 * m_bar * v0**2
    l_v0 = float(np.mean((v0_obs - v0) ** 2))
    l_ic = float(np.mean(w**2))
    l_ke = float(np.mean(ke_resid**2))
    total = weights.lambda_v0 * l_v0 + weights.lambda_ic * l_ic + weights.lambda_ke * l_ke
    d_w = (2.0 / n) * weights.lambda_ic * w
    d_v0 = (2.0 / n) * (
        weights.lambda_v0 * (v0 - v0_obs) - weights.lambda_ke * ke_resid * m_bar * v0
    )
    grads = nn.grad_params_dual(
        disp_net, Xt, X.shape[1], d_w[:, None], (time_scale * d_v0)[:, None]
    )
    return total, (l_v0, l_ic, l_ke), grads


def _loss_mass_with_grads(mass_net, X, m_obs, e_meas, v_bar, weights):
    n = X.shape[0]
    m_pred = np.atleast_2d(nn.forward(mass_net, X))[:, 0]
    ke_resid = e_meas - 0.5 * m_pred * v_bar**2
    l_m = float(np.mean((m_obs - m_pred) ** 2))
    l_ke_m = float(np.mean(ke_resid**2))
    total = weights.lambda_m * l_m + weights.lambda_ke_m * l_ke_m
    d_m = (2.0 / n) * (
        weights.lambda_m * (m_pred - m_obs) - weights.lambda_ke_m * ke_resid * 0.5 * v_bar**2
    )
    grads = nn.grad_params(mass_net, X, d_m[:, None])
    return total, (l_m, l_ke_m), grads


def _run_phase(net, loss_grad_fn, lr, config, history, cycle, phase):
    """Full-batch Adam with patience on the best total loss.

    The best-loss parameters seen during the phase are restored at exit, so
    the phase-end total reported to the outer loop is the best total.
    """
    params = nn.get_params(net)
    state = nn.adam_init(params, lr)
    best = np.inf
    best_params = nn.copy_params(params)
    stale = 0
    for epoch in range(config.max_epochs_per_phase):
        nn.set_params(net, params)
        total, parts, grads = loss_grad_fn(net)
        if not np.isfinite(total):
            raise TrainingError(f"non-finite loss in phase {phase}, cycle {cycle}, epoch {epoch}")
        history.append(HistoryRow(cycle, phase, epoch, total, tuple(parts)))
        if total < best:
            best = total
            best_params = nn.copy_params(params)
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
        params = nn.adam_step(params, grads, state)
    nn.set_params(net, best_params)
    return best, state


def train(features, v0_obs, m_obs, e_meas, config: TrainConfig | None = None,
          weights: LossWeights | None = None) -> TrainState:
    """Alternating optimization of the displacement and mass surrogates.

    Phase A fixes the per-sample mass (observed in the first cycle, the mass
    network's prediction afterwards) and fits the displacement network; Phase
    B freezes the displacement network, computes the fixed velocities once,
    and fits the mass network. Stops early when both phase-end totals improve
    by less than OUTER_REL_TOL relative between consecutive cycles.
    """
    config = config or TrainConfig()
    weights = weights or LossWeights()
    X = np.atleast_2d(np.asarray(features, dtype=float))
    v0_obs = np.asarray(v0_obs, dtype=float)
    m_obs = np.asarray(m_obs, dtype=float)
    e_meas = np.asarray(e_meas, dtype=float)
    _check_batch(X, v0_obs, m_obs, e_meas)
    if np.any(m_obs <= 0) or np.any(e_meas <= 0):
        raise ValueError("mass and energy labels must be positive")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")

    n_features = X.shape[1]
    scale = config.time_input_scale
    disp_net = nn.init_network(
        (n_features + 1, *config.disp_hidden, 1), config.disp_activation, "identity", seed=config.seed
    )
    mass_net = nn.init_network(
        (n_features, *config.mass_hidden, 1), config.mass_activation, "softplus_plus_epsilon",
        seed=config.seed + 1,
    )
    # Zero readout layers: the first epochs then fit a linear readout on the
    # frozen random hidden features, and gradient flow into the hidden layers
    # grows with the readout weights. This avoids the saturation slam that
    # elementwise Adam steps at lr ~1e-2 otherwise cause in wide tanh layers.
    disp_net.weights[-1][:] = 0.0
    mass_net.weights[-1][:] = 0.0

    history: list[HistoryRow] = []
    m_bar = m_obs.copy()
    v_bar = np.zeros_like(v0_obs)
    prev_disp = prev_mass = np.inf
    best_disp = best_mass = np.inf
    adam_disp = adam_mass = None
    cycle = 0
    for cycle in range(config.max_cycles):
        if cycle > 0:
            m_bar = np.atleast_2d(nn.forward(mass_net, X))[:, 0].copy()
        best_disp, adam_disp = _run_phase(
            disp_net,
            lambda net: _loss_disp_with_grads(net, X, v0_obs, e_meas, m_bar, weights, scale),
            config.lr_disp, config, history, cycle, PHASE_DISP,
        )
        v_bar = scale * predict_velocity_batch(disp_net, X)
        best_mass, adam_mass = _run_phase(
            mass_net,
            lambda net: _loss_mass_with_grads(net, X, m_obs, e_meas, v_bar, weights),
            config.lr_mass, config, history, cycle, PHASE_MASS,
        )
        if cycle > 0:
            disp_gain = (prev_disp - best_disp) / max(abs(prev_disp), 1e-300)
            mass_gain = (prev_mass - best_mass) / max(abs(prev_mass), 1e-300)
            if disp_gain < OUTER_REL_TOL and mass_gain < OUTER_REL_TOL:
                break
        prev_disp, prev_mass = best_disp, best_mass

    # Fold the internal time unit into the first-layer time column: the
    # returned network then differentiates in physical seconds and needs no
    # side-channel scale at inference time.
    disp_net.weights[0][:, n_features] *= scale

    return TrainState(
        disp_net=disp_net,
        mass_net=mass_net,
        adam_disp=adam_disp,
        adam_mass=adam_mass,
        fixed_mass=m_bar,
        fixed_velocity=v_bar,
        cycle=cycle,
        history=history,
        best_disp_total=best_disp,
        best_mass_total=best_mass,
        n_features=n_features,
    )


def predict(state: TrainState, features) -> Prediction:
    """Mass and velocity from the trained surrogates; energy by construction."""
    row = np.asarray(features, dtype=float)
    if row.ndim != 1 or row.size != state.n_features:
        raise ValueError(f"expected a feature vector of length {state.n_features}")
    mass = float(np.atleast_2d(nn.forward(state.mass_net, row[None, :]))[0, 0])
    v0 = predict_velocity(state.disp_net, row)
    return Prediction(mass_kg=mass, v0_mps=v0, energy_j=kinetic_energy(mass, v0))


def predict_batch(state: TrainState, features: np.ndarray):
    """(mass, velocity, energy) arrays for a batch of feature rows."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    mass = np.atleast_2d(nn.forward(state.mass_net, X))[:, 0]
    v0 = predict_velocity_batch(state.disp_net, X)
    return mass, v0, 0.5 * mass * v0 * v0


@dataclass
class BaselineState:
    """Physics-ablated comparator: one network regressing energy directly."""

    net: nn.Network
    history: list[HistoryRow]
    best_total: float


def train_baseline(features, e_meas, config: TrainConfig | None = None) -> BaselineState:
    """Single network, identity output, plain MSE on energy, same Adam contract."""
    config = config or TrainConfig()
    X = np.atleast_2d(np.asarray(features, dtype=float))
    e_meas = np.asarray(e_meas, dtype=float)
    _check_batch(X, e_meas)
    net = nn.init_network(
        (X.shape[1], *config.disp_hidden, 1), config.disp_activation, "identity", seed=config.seed
    )

    def mse_with_grads(net):
        pred = np.atleast_2d(nn.forward(net, X))[:, 0]
        resid = pred - e_meas
        total = float(np.mean(resid**2))
        grads = nn.grad_params(net, X, (2.0 / X.shape[0]) * resid[:, None])
        return total, (total,), grads

    history: list[HistoryRow] = []
    best, _ = _run_phase(net, mse_with_grads, config.lr_disp, config, history, 0, "baseline")
    return BaselineState(net=net, history=history, best_total=best)


def predict_baseline(state: BaselineState, features: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    return np.atleast_2d(nn.forward(state.net, X))[:, 0]
