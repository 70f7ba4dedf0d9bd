"""End-to-end checks on synthetic systems with a known Lyapunov oracle."""
import numpy as np
import pytest

from modules.certifier import (
    CertifyConfig,
    Status,
    certify_trajectory,
    reassess_certificate,
    save_verdict,
)
from modules.learner import CholeskyParams, Termination, TrainConfig, batch_loss
from modules.report import build_bundle, render_html
from modules.synth import (
    NoiseSpec,
    add_noise,
    random_hurwitz_2x2,
    simulate,
    solve_lyapunov_2x2,
)
from modules.timeseries import preprocess

SYSTEMS = 20


def oracle_params(Q):
    L = np.linalg.cholesky(Q.Q)
    rows, cols = np.tril_indices(2, -1)
    return CholeskyParams(2, np.concatenate([np.log(np.expm1(np.diag(L))), L[rows, cols]]))


@pytest.fixture(scope='module')
def hurwitz_runs():
    rng = np.random.default_rng(42)
    runs = []
    for _ in range(SYSTEMS):
        system = random_hurwitz_2x2(rng, 0.4, 1.0)
        decay = -float(np.max(np.linalg.eigvals(system.A).real))
        # keep ‖ξ‖² well above the margin over the whole horizon
        t_end = min(30.0, 1.5 / decay)
        traj = preprocess(simulate(system, [1.0, 0.0], t_end, 0.01), 0.1)
        verdict = certify_trajectory(traj, CertifyConfig(dt=0.1))
        runs.append((system, traj, verdict))
    return runs


def test_training_converges_on_hurwitz_systems(hurwitz_runs):
    converged = [v for _, _, v in hurwitz_runs if v.outcome.termination is Termination.CONVERGED]
    assert len(converged) >= SYSTEMS - 1
    for verdict in converged:
        assert verdict.outcome.final_loss <= 1e-9
        assert verdict.outcome.epochs_run <= 5000


def test_oracle_achieves_zero_loss(hurwitz_runs):
    config = TrainConfig(gamma=1e-3)
    for system, traj, _ in hurwitz_runs:
        Q = solve_lyapunov_2x2(system.A)
        assert batch_loss(oracle_params(Q), traj, config) == 0.0


def test_converged_noiseless_runs_have_zero_epsilon(hurwitz_runs):
    for _, _, verdict in hurwitz_runs:
        if verdict.outcome.termination is Termination.CONVERGED:
            assert verdict.status is Status.CERTIFIED
            assert verdict.certificate.epsilon == 0.0


def test_epsilon_grows_with_measurement_noise(oscillator_raw, oscillator_traj):
    verdict = certify_trajectory(oscillator_traj, CertifyConfig(dt=0.1))
    assert verdict.status is Status.CERTIFIED

    medians = []
    for sigma in (0.01, 0.05, 0.1):
        epsilons = []
        for seed in range(5):
            noisy = preprocess(add_noise(oscillator_raw, NoiseSpec(sigma=sigma, seed=seed)), 0.1)
            epsilons.append(reassess_certificate(verdict.certificate, noisy).epsilon)
        assert min(epsilons) > 0.0
        medians.append(float(np.median(epsilons)))
    assert medians[0] < medians[1] < medians[2]


@pytest.mark.parametrize('seed', range(5))
def test_growing_error_is_rejected(growth_traj, seed):
    verdict = certify_trajectory(growth_traj, CertifyConfig(dt=0.1, train=TrainConfig(seed=seed)))
    assert verdict.status in (Status.NOT_FOUND, Status.DIVERGED)
    assert verdict.certificate is None


def test_outputs_are_reproducible(tmp_path, oscillator_traj):
    texts = []
    for run in range(2):
        config = CertifyConfig(dt=0.1, train=TrainConfig(seed=5))
        verdict = certify_trajectory(oscillator_traj, config)
        json_text = save_verdict(verdict, str(tmp_path / f'verdict{run}.json'))
        html = render_html(build_bundle(verdict, oscillator_traj, provenance={'seed': 5}))
        texts.append((json_text, html))
    assert texts[0] == texts[1]

