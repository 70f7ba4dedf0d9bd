import numpy as np
import pytest

from modules.synth import damped_oscillator, exponential_growth, simulate
from modules.timeseries import UniformTrajectory, preprocess


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope='session')
def oscillator_raw():
    """Lightly damped oscillator, e(0) = 1, 10 s at RK4 step 0.01"""
    return simulate(damped_oscillator(0.1, 1.0), [1.0, 0.0], 10.0, 0.01)


@pytest.fixture(scope='session')
def oscillator_traj(oscillator_raw):
    return preprocess(oscillator_raw, 0.1)


@pytest.fixture(scope='session')
def growth_traj():
    """e(t) = 0.1·e^{0.5t} over 60 samples"""
    raw = simulate(exponential_growth(0.5), [0.1, 0.05], 5.9, 0.1)
    return preprocess(raw, 0.1)


@pytest.fixture
def make_traj():
    """Build a UniformTrajectory straight from (ξ, ξ̇) samples"""
    def factory(xi, xidot, dt=0.1):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        xidot = np.atleast_2d(np.asarray(xidot, dtype=float))
        m = xi.shape[1] // 2
        count = len(xi) + 2
        t = dt * np.arange(count)
        e = np.zeros((count, m))
        e[1:-1] = xi[:, :m]
        return UniformTrajectory(dt, m, t, e, xi, xidot)
    return factory
