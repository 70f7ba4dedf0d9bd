import logging
from dataclasses import dataclass, asdict
from enum import Enum

import numpy as np
from scipy.special import expit

from config import Config
from modules.lyapunov import (
    LowerTriangularFactor,
    QuadraticForm,
    assemble_Q,
    dimension_from_packed,
    packed_size,
    vdot_samples,
)
from utils.validators import InputError, InvariantError, raise_if_errors, validate_train_config

logger = logging.getLogger(__name__)


class Termination(str, Enum):
    CONVERGED = 'converged'
    EPOCH_LIMIT = 'epoch_limit'
    DIVERGED = 'diverged'


@dataclass
class TrainConfig:
    gamma: float = Config.GAMMA
    learning_rate: float = Config.LEARNING_RATE
    epochs: int = Config.EPOCHS
    seed: int = Config.SEED
    theta_max: float = Config.THETA_MAX
    tol_loss: float = Config.TOL_LOSS
    mode: str = Config.MODE
    hidden_sizes: tuple = Config.HIDDEN_SIZES
    optimizer: str = Config.OPTIMIZER
    init_noise: float = Config.INIT_NOISE

    def to_dict(self):
        data = asdict(self)
        data['hidden_sizes'] = list(self.hidden_sizes)
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if 'hidden_sizes' in data:
            data['hidden_sizes'] = tuple(data['hidden_sizes'])
        return cls(**data)


@dataclass(frozen=True, eq=False)
class CholeskyParams:
    """Unconstrained parameter vector θ of length n(n+1)/2"""
    n: int
    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        if theta.size != packed_size(self.n):
            raise InputError(f"theta must have {packed_size(self.n)} entries for n={self.n}, got {theta.size}")
        object.__setattr__(self, 'theta', theta)

    def flat(self):
        return self.theta

    def with_flat(self, vector):
        return CholeskyParams(self.n, vector)


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Weights (out x in) and biases per layer; tanh on every hidden layer"""
    weights: tuple
    biases: tuple

    def __post_init__(self):
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float).ravel() for b in self.biases)
        if len(weights) != len(biases) or not weights:
            raise InputError("MLP needs one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[0] != b.size:
                raise InputError(f"Layer {i}: weight {w.shape} does not match bias {b.shape}")
            if i > 0 and w.shape[1] != weights[i - 1].shape[0]:
                raise InputError(f"Layer {i}: input width {w.shape[1]} != previous output {weights[i - 1].shape[0]}")
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'biases', biases)
        dimension_from_packed(weights[-1].shape[0])

    @property
    def sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n(self):
        return dimension_from_packed(self.sizes[-1])

    def flat(self):
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def with_flat(self, vector):
        weights, biases = [], []
        offset = 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vector[offset:offset + w.size].reshape(w.shape))
            offset += w.size
            biases.append(vector[offset:offset + b.size])
            offset += b.size
        return MlpParams(tuple(weights), tuple(biases))


@dataclass
class TrainOutcome:
    loss_history: np.ndarray
    param_norm_history: np.ndarray
    termination: Termination
    final_params: object = None
    reason: str = ''

    @property
    def epochs_run(self):
        return len(self.loss_history)

    @property
    def final_loss(self):
        return float(self.loss_history[-1]) if len(self.loss_history) else float('nan')

    @property
    def final_param_norm(self):
        return float(self.param_norm_history[-1]) if len(self.param_norm_history) else float('nan')


def softplus(x):
    """ln(1 + eˣ) via max(x, 0) + ln(1 + e^{-|x|})"""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _outputs_to_L(outputs, n):
    """Assemble L from n diagonal pre-activations followed by the strict lower triangle by rows"""
    outputs = np.asarray(outputs, dtype=float)
    L = np.zeros(outputs.shape[:-1] + (n, n))
    diag = np.arange(n)
    rows, cols = np.tril_indices(n, -1)
    L[..., diag, diag] = softplus(outputs[..., :n])
    L[..., rows, cols] = outputs[..., n:]
    return L


def _dL_to_doutputs(dL, outputs, n):
    """Chain dloss/dL back through the layout (softplus' = sigmoid on the diagonal)"""
    diag = np.arange(n)
    rows, cols = np.tril_indices(n, -1)
    d_diag = dL[..., diag, diag] * expit(outputs[..., :n])
    d_off = dL[..., rows, cols]
    return np.concatenate([d_diag, d_off], axis=-1)


def assemble_factor(params):
    """CholeskyParams -> LowerTriangularFactor"""
    L = _outputs_to_L(params.theta, params.n)
    return LowerTriangularFactor(params.n, L[np.tril_indices(params.n)])


def hinge_loss(vdot, gamma):
    """ψ = max{0, V̇ + γ}; works elementwise on arrays"""
    result = np.maximum(0.0, np.asarray(vdot, dtype=float) + gamma)
    return float(result) if result.ndim == 0 else result


def _forward(params, X):
    """Batch forward pass; returns (outputs, activations) with activations[0] = X"""
    activations = [X]
    a = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if i == last else np.tanh(z)
        if i != last:
            activations.append(a)
    return a, activations


def mlp_forward(params, xi):
    """Network output for one error state, in the CholeskyParams layout"""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (params.sizes[0],):
        raise InputError(f"xi must have dimension {params.sizes[0]}, got shape {xi.shape}")
    outputs, _ = _forward(params, xi[None, :])
    return outputs[0]


def _check_dims(params, traj):
    if params.n != traj.n:
        raise InputError(f"Parameters are for n={params.n} but the trajectory has n={traj.n}")
    if isinstance(params, MlpParams) and params.sizes[0] != traj.n:
        raise InputError(f"Network input width {params.sizes[0]} != state dimension {traj.n}")
    if len(traj) == 0:
        raise InputError("Trajectory has no samples")


def _vdot_and_L(params, traj):
    if isinstance(params, CholeskyParams):
        L = _outputs_to_L(params.theta, params.n)
        return vdot_samples(L @ L.T, traj.xi, traj.xidot), L, None, None
    outputs, activations = _forward(params, traj.xi)
    L = _outputs_to_L(outputs, params.n)
    Q = L @ np.swapaxes(L, -1, -2)
    vdot = 2.0 * np.einsum('ki,kij,kj->k', traj.xi, Q, traj.xidot)
    return vdot, L, outputs, activations


def batch_loss(params, traj, config):
    """Mean hinge loss over all samples"""
    _check_dims(params, traj)
    vdot, _, _, _ = _vdot_and_L(params, traj)
    return float(np.mean(hinge_loss(vdot, config.gamma)))


def batch_grad(params, traj, config):
    """Exact gradient of batch_loss w.r.t. the flat parameter vector.

    Samples sitting exactly on the hinge kink contribute zero.
    """
    _check_dims(params, traj)
    count = len(traj)
    vdot, L, outputs, activations = _vdot_and_L(params, traj)
    active = (vdot + config.gamma) > 0

    if isinstance(params, CholeskyParams):
        xi = traj.xi[active]
        xidot = traj.xidot[active]
        S = xi.T @ xidot
        dL = (2.0 / count) * (S + S.T) @ L
        return _dL_to_doutputs(dL, params.theta, params.n)

    outer = np.einsum('ki,kj->kij', traj.xi, traj.xidot)
    M = (outer + np.swapaxes(outer, -1, -2)) * active[:, None, None]
    dL = (2.0 / count) * (M @ L)
    delta = _dL_to_doutputs(dL, outputs, params.n)

    grads = []
    last = len(params.weights) - 1
    for i in range(last, -1, -1):
        a_in = activations[i]
        grads.append((delta.T @ a_in, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ params.weights[i]) * (1.0 - activations[i] ** 2)
    grads.reverse()

    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def gradient_step(params, grad, config):
    """θ ← θ − lr·∇"""
    return params.with_flat(params.flat() - config.learning_rate * grad)


OPTIMIZERS = {
    'gd': gradient_step,
}


def init_params(n, config, rng):
    """Near-diagonal start: pre-activations ~ U(-noise, noise), so diag L ≈ ln 2"""
    size = packed_size(n)
    noise = config.init_noise
    if config.mode == 'constant':
        return CholeskyParams(n, rng.uniform(-noise, noise, size))

    sizes = [n] + list(config.hidden_sizes) + [size]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-2], sizes[1:-1]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    weights.append(rng.uniform(-noise, noise, (size, sizes[-2])))
    biases.append(rng.uniform(-noise, noise, size))
    return MlpParams(tuple(weights), tuple(biases))


def param_norm(params):
    """‖θ‖∞ over every trainable value"""
    return float(np.max(np.abs(params.flat())))


def _assert_positive_definite(params):
    if isinstance(params, CholeskyParams):
        Q = assemble_Q(assemble_factor(params))
        assert Q.is_positive_definite(), "assembled Q lost positive definiteness"


def train(traj, config):
    """Full-batch gradient descent; the seed only drives initialization"""
    raise_if_errors(validate_train_config(config, tuple(OPTIMIZERS)))
    if len(traj) == 0:
        raise InputError("Trajectory has no samples")

    rng = np.random.default_rng(config.seed)
    params = init_params(traj.n, config, rng)
    step = OPTIMIZERS[config.optimizer]
    debug = logger.isEnabledFor(logging.DEBUG)

    losses = []
    norms = []
    termination = Termination.EPOCH_LIMIT
    reason = f"loss above {config.tol_loss:g} after {config.epochs} epochs"

    logger.info("Training %s mode on %d samples (n=%d, gamma=%g, lr=%g, epochs=%d)",
                config.mode, len(traj), traj.n, config.gamma, config.learning_rate, config.epochs)

    for epoch in range(config.epochs):
        loss = batch_loss(params, traj, config)
        losses.append(loss)
        norms.append(param_norm(params))

        if not np.isfinite(loss):
            termination = Termination.DIVERGED
            reason = f"loss became non-finite at epoch {epoch}"
            break
        if loss <= config.tol_loss:
            termination = Termination.CONVERGED
            reason = f"loss {loss:.3g} <= {config.tol_loss:g} at epoch {epoch}"
            break
        if epoch == config.epochs - 1:
            break

        if debug:
            _assert_positive_definite(params)
        if debug and epoch % Config.LOG_EVERY == 0:
            logger.debug("epoch %d loss %.6g |theta|_inf %.6g", epoch, loss, norms[-1])

        params = step(params, batch_grad(params, traj, config), config)

        norm = param_norm(params)
        if not np.isfinite(norm) or norm > config.theta_max:
            termination = Termination.DIVERGED
            reason = f"parameters diverged: |theta|_inf = {norm:.6g} > {config.theta_max:g} at epoch {epoch}"
            break
        if isinstance(params, CholeskyParams):
            try:
                assemble_factor(params)
            except InvariantError:
                termination = Termination.DIVERGED
                reason = f"factor diagonal underflowed at epoch {epoch}"
                break

    if termination is Termination.DIVERGED:
        logger.warning("Training diverged: %s", reason)
    else:
        logger.info("Training finished: %s (%s)", termination.value, reason)

    return TrainOutcome(
        loss_history=np.array(losses),
        param_norm_history=np.array(norms),
        termination=termination,
        final_params=params,
        reason=reason,
    )


def q_samples(params, xi):
    """Q(ξ_k) for every sample (constant mode repeats one matrix)"""
    if isinstance(params, CholeskyParams):
        L = _outputs_to_L(params.theta, params.n)
        return np.broadcast_to(L @ L.T, (len(xi), params.n, params.n))
    outputs, _ = _forward(params, np.asarray(xi, dtype=float))
    L = _outputs_to_L(outputs, params.n)
    return L @ np.swapaxes(L, -1, -2)


def extract_certificate_matrix(params, traj):
    """(Q̄, non-constancy): the constant certificate and max_k ‖Q(ξ_k) − Q̄‖∞.

    For constant mode Q̄ is the learned Q and non-constancy is 0. For mlp mode
    Q̄ is the sample mean of Q(ξ_k).
    """
    if isinstance(params, CholeskyParams):
        return assemble_Q(assemble_factor(params)), 0.0
    Qs = q_samples(params, traj.xi)
    Q_bar = Qs.mean(axis=0)
    Q_bar = 0.5 * (Q_bar + Q_bar.T)
    nonconstancy = float(np.max(np.abs(Qs - Q_bar)))
    return QuadraticForm(Q_bar), nonconstancy
