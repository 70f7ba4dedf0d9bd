import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from modules.lyapunov import QuadraticForm
from modules.timeseries import RawTrajectory
from utils.validators import InputError, InvariantError, validate_positive, raise_if_errors

logger = logging.getLogger(__name__)


class Stability(str, Enum):
    HURWITZ = 'hurwitz'
    UNSTABLE = 'unstable'


def classify(A):
    """Hurwitz iff every eigenvalue has negative real part"""
    return Stability.HURWITZ if np.max(np.linalg.eigvals(A).real) < 0 else Stability.UNSTABLE


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """ξ̇ = Aξ with ξ = [e; ė] of dimension 2m"""
    A: np.ndarray
    label: Stability = None

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2 != 0:
            raise InputError(f"A must be square with even dimension 2m, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise InputError("A must be finite")
        actual = classify(A)
        if self.label is not None and Stability(self.label) is not actual:
            raise InvariantError(f"Label {Stability(self.label).value} contradicts eigenvalues ({actual.value})")
        A.setflags(write=False)
        object.__setattr__(self, 'A', A)
        object.__setattr__(self, 'label', actual)

    @property
    def m(self):
        return self.A.shape[0] // 2


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        raise_if_errors(validate_positive('sigma', self.sigma, allow_zero=True))
        if not np.isfinite(self.sigma):
            raise InputError("sigma must be finite")


def damped_oscillator(damping, freq):
    """ë + 2ζωė + ω²e = 0 in companion form"""
    raise_if_errors(validate_positive('freq', freq) + validate_positive('damping', damping, allow_zero=True))
    return LtiSystem([[0.0, 1.0], [-freq ** 2, -2.0 * damping * freq]])


def exponential_growth(rate):
    """ξ̇ = rate·ξ; from ξ0 = [a, rate·a] the error is e(t) = a·e^{rate·t}"""
    return LtiSystem(rate * np.eye(2))


def random_hurwitz_2x2(rng, low=0.2, high=2.0):
    """Random companion-form Hurwitz matrix [[0, 1], [-a0, -a1]], a0, a1 > 0"""
    a0, a1 = rng.uniform(low, high, 2)
    return LtiSystem([[0.0, 1.0], [-a0, -a1]], Stability.HURWITZ)


def _rk4_step(A, xi, h):
    k1 = A @ xi
    k2 = A @ (xi + 0.5 * h * k1)
    k3 = A @ (xi + 0.5 * h * k2)
    k4 = A @ (xi + h * k3)
    return xi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_steps(t_end, h):
    errors = validate_positive('h', h) + validate_positive('t_end', t_end)
    if not errors and t_end < h:
        errors.append("t_end must be at least h")
    raise_if_errors(errors)


def simulate_states(sys, xi0, t_end, h):
    """Fixed-step RK4; returns (t, ξ) with t = 0, h, ..., floor(t_end/h)·h"""
    _check_steps(t_end, h)
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (sys.A.shape[0],):
        raise InputError(f"xi0 must have dimension {sys.A.shape[0]}, got shape {xi0.shape}")

    steps = int(np.floor(t_end / h + 1e-9))
    t = h * np.arange(steps + 1)
    states = np.empty((steps + 1, xi0.size))
    states[0] = xi0
    for k in range(steps):
        states[k + 1] = _rk4_step(sys.A, states[k], h)
    return t, states


def simulate(sys, xi0, t_end, h):
    """RK4 trajectory in tracking form: r ≡ 0 and x = −e, so r − x = e"""
    t, states = simulate_states(sys, xi0, t_end, h)
    e = states[:, :sys.m]
    logger.debug("Simulated %d steps of a %s system", len(t) - 1, sys.label.value)
    return RawTrajectory(t, np.zeros_like(e), -e)


def add_noise(raw, spec):
    """x ← x + N(0, σ²) per entry from the seeded generator; r unchanged"""
    if spec.sigma == 0:
        return raw
    rng = np.random.default_rng(spec.seed)
    return RawTrajectory(raw.t, raw.r, raw.x + rng.normal(0.0, spec.sigma, raw.x.shape))


def solve_lyapunov_2x2(A):
    """Unique symmetric Q with AᵀQ + QA = −I, from the 3 equations in (a, b, c)"""
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise InputError(f"A must be 2x2, got shape {A.shape}")
    if classify(A) is not Stability.HURWITZ:
        raise InputError("A must be Hurwitz")

    (p, q), (r, s) = A
    # Q = [[a, b], [b, c]]
    system = np.array([
        [2 * p, 2 * r, 0.0],
        [q, p + s, r],
        [0.0, 2 * q, 2 * s],
    ])
    a, b, c = np.linalg.solve(system, [-1.0, 0.0, -1.0])
    return QuadraticForm([[a, b], [b, c]])


def solve_lyapunov(A):
    """AᵀQ + QA = −I for any Hurwitz A"""
    A = np.asarray(A, dtype=float)
    if classify(A) is not Stability.HURWITZ:
        raise InputError("A must be Hurwitz")
    Q = solve_continuous_lyapunov(A.T, -np.eye(A.shape[0]))
    return QuadraticForm(0.5 * (Q + Q.T))
