import json

import numpy as np
import pytest

from modules.certifier import (
    CertifyConfig,
    QuadraticCertificate,
    Status,
    Verdict,
    certify,
    certify_trajectory,
    estimate_epsilon,
    load_verdict,
    reassess_certificate,
    save_verdict,
    split_holdout,
    verdict_reason,
    verify_certificate,
)
from modules.learner import Termination, TrainConfig, TrainOutcome
from modules.lyapunov import QuadraticForm, eval_Vdot, vdot_samples
from modules.synth import NoiseSpec, add_noise
from modules.timeseries import preprocess
from utils.helpers import from_json_float
from utils.validators import InputError, InvariantError

FLIGHT_Q = [[0.2425, -0.0134], [-0.0134, 0.4804]]


@pytest.fixture(scope='module')
def oscillator_verdict(oscillator_traj):
    return certify_trajectory(oscillator_traj, CertifyConfig(dt=0.1))


def test_estimate_epsilon_takes_the_maximum(make_traj):
    vdots = [-1.0, 0.5, 2.3]
    traj = make_traj([[1.0, 0.0]] * 3, [[v / 2, 0.0] for v in vdots])
    assert estimate_epsilon(QuadraticForm(np.eye(2)), traj) == pytest.approx(2.3, abs=1e-12)


def test_estimate_epsilon_clamps_at_zero(make_traj):
    traj = make_traj([[1.0, 0.0]] * 2, [[-0.5, 0.0], [-2.0, 0.0]])
    assert estimate_epsilon(QuadraticForm(np.eye(2)), traj) == 0.0


def test_estimate_epsilon_matches_a_scan(rng, make_traj):
    for _ in range(100):
        count = int(rng.integers(1, 30))
        traj = make_traj(rng.normal(size=(count, 2)), rng.normal(size=(count, 2)))
        L = np.tril(rng.normal(size=(2, 2)))
        L[np.diag_indices(2)] = rng.uniform(0.2, 2.0, 2)
        Q = QuadraticForm(L @ L.T)
        expected = 0.0
        for xi, xidot in zip(traj.xi, traj.xidot):
            expected = max(expected, eval_Vdot(Q, xi, xidot))
        assert estimate_epsilon(Q, traj) == expected
        assert estimate_epsilon(Q, traj) == pytest.approx(
            max(0.0, float(np.max(vdot_samples(Q, traj.xi, traj.xidot)))), rel=1e-12, abs=1e-12)


def test_estimate_epsilon_grows_with_samples(rng, make_traj):
    xi, xidot = rng.normal(size=(40, 2)), rng.normal(size=(40, 2))
    Q = QuadraticForm(np.eye(2))
    previous = 0.0
    for count in range(1, 41):
        epsilon = estimate_epsilon(Q, make_traj(xi[:count], xidot[:count]))
        assert epsilon >= previous
        previous = epsilon


def test_certifies_damped_oscillator(oscillator_traj, oscillator_verdict):
    assert oscillator_verdict.status is Status.CERTIFIED
    assert oscillator_verdict.certified
    cert = oscillator_verdict.certificate
    assert cert.epsilon == 0.0
    assert cert.Q.is_positive_definite()
    assert verify_certificate(oscillator_verdict, oscillator_traj)
    assert verdict_reason(oscillator_verdict).startswith('CERTIFIED')


def test_growing_error_is_not_certified(growth_traj):
    config = CertifyConfig(dt=0.1, train=TrainConfig(epochs=500))
    verdict = certify_trajectory(growth_traj, config)
    assert verdict.status in (Status.NOT_FOUND, Status.DIVERGED)
    assert verdict.certificate is None
    assert 'does not imply instability' in verdict_reason(verdict)


def test_certify_from_raw(oscillator_raw):
    verdict = certify(oscillator_raw, CertifyConfig(dt=0.1))
    assert verdict.status is Status.CERTIFIED
    assert verdict.m == 1


def _fixed_verdict(status=Status.CERTIFIED, epsilon=4.8871):
    outcome = TrainOutcome(np.array([1.0, 0.1, 0.0]), np.array([0.1, 0.2, 0.3]), Termination.CONVERGED)
    cert = QuadraticCertificate(QuadraticForm(FLIGHT_Q), 1e-3, epsilon) if status is Status.CERTIFIED else None
    return Verdict(status, outcome, certificate=cert, reason='stub', config=CertifyConfig(dt=30.0), m=1)


def test_verdict_reason_certified():
    reason = verdict_reason(_fixed_verdict())
    assert 'epsilon = 4.8871' in reason
    assert 'gamma = 0.001' in reason


def test_verdict_reason_diverged_and_not_found():
    diverged = verdict_reason(_fixed_verdict(Status.DIVERGED))
    assert diverged.startswith('DIVERGED')
    assert 'diverged' in diverged
    not_found = verdict_reason(_fixed_verdict(Status.NOT_FOUND))
    assert not_found.startswith('NOT FOUND')
    assert 'does not, in itself, imply that the system is unstable' in not_found


def test_certificate_rejects_negative_epsilon():
    with pytest.raises(InvariantError):
        QuadraticCertificate(QuadraticForm(np.eye(2)), 1e-3, -0.1)


def test_certificate_coefficients():
    cert = QuadraticCertificate(QuadraticForm(FLIGHT_Q), 1e-3, 0.0)
    a, cross, c = cert.coefficients
    assert (a, c) == (0.2425, 0.4804)
    assert cross == pytest.approx(-0.0268)
    with pytest.raises(InputError):
        QuadraticCertificate(QuadraticForm(np.eye(4)), 1e-3, 0.0).coefficients


def test_verdict_round_trip(tmp_path, oscillator_traj, oscillator_verdict):
    path = tmp_path / 'verdict.json'
    save_verdict(oscillator_verdict, str(path))
    loaded = load_verdict(str(path), traj=oscillator_traj)
    assert loaded.status is Status.CERTIFIED
    np.testing.assert_array_equal(loaded.certificate.Q.Q, oscillator_verdict.certificate.Q.Q)
    assert loaded.certificate.epsilon == oscillator_verdict.certificate.epsilon
    assert loaded.outcome.termination is Termination.CONVERGED
    assert loaded.config.to_dict() == oscillator_verdict.config.to_dict()


def test_verdict_document_has_fixed_fields(tmp_path, oscillator_verdict):
    path = tmp_path / 'verdict.json'
    save_verdict(oscillator_verdict, str(path))
    data = json.loads(path.read_text())
    for name in ('mode', 'm', 'dt', 'gamma', 'Q', 'epsilon', 'termination', 'loss_final', 'seed', 'config'):
        assert name in data
    assert data['termination'] == 'converged'
    assert data['config']['eps_max'] == 'inf'


def test_tampered_epsilon_is_detected(tmp_path, oscillator_traj, oscillator_verdict):
    path = tmp_path / 'verdict.json'
    save_verdict(oscillator_verdict, str(path))
    data = json.loads(path.read_text())
    data['epsilon'] = 0.5
    path.write_text(json.dumps(data))
    with pytest.raises(InvariantError, match='does not match'):
        load_verdict(str(path), traj=oscillator_traj)


def test_verdict_missing_fields(tmp_path):
    path = tmp_path / 'verdict.json'
    path.write_text(json.dumps({'mode': 'constant'}))
    with pytest.raises(InputError, match='missing fields'):
        load_verdict(str(path))


def test_verdict_output_is_deterministic(tmp_path, oscillator_verdict):
    first = save_verdict(oscillator_verdict, str(tmp_path / 'a.json'))
    second = save_verdict(oscillator_verdict, str(tmp_path / 'b.json'))
    assert first == second
    assert first.endswith('\n')


def test_split_holdout(oscillator_traj):
    training, held_out = split_holdout(oscillator_traj, 0.2)
    assert len(training) + len(held_out) == len(oscillator_traj)
    assert len(held_out) == 20
    np.testing.assert_array_equal(held_out.xi, oscillator_traj.xi[-20:])
    assert split_holdout(oscillator_traj, 0.0) == (oscillator_traj, None)


def test_split_holdout_rejects_empty_split(make_traj):
    traj = make_traj([[1.0, 0.0]], [[0.0, 1.0]])
    with pytest.raises(InputError, match='empty split'):
        split_holdout(traj, 0.5)


def test_holdout_epsilon_is_reported(oscillator_traj):
    verdict = certify_trajectory(oscillator_traj, CertifyConfig(dt=0.1, holdout_fraction=0.2))
    assert verdict.status is Status.CERTIFIED
    assert verdict.certificate.epsilon == 0.0
    assert verdict.epsilon_holdout is not None and verdict.epsilon_holdout >= 0.0


def test_reassess_on_noisy_samples(oscillator_raw, oscillator_verdict):
    noisy = preprocess(add_noise(oscillator_raw, NoiseSpec(sigma=0.05, seed=1)), 0.1)
    cert = reassess_certificate(oscillator_verdict.certificate, noisy)
    assert cert.epsilon > 0.0
    np.testing.assert_array_equal(cert.Q.Q, oscillator_verdict.certificate.Q.Q)


def test_reassess_rejects_dimension_mismatch(make_traj, oscillator_verdict):
    traj = make_traj([[1.0, 0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0, 0.0]])
    with pytest.raises(InputError, match='n=2'):
        reassess_certificate(oscillator_verdict.certificate, traj)


@pytest.mark.parametrize('overrides', [
    {'dt': 0.0},
    {'window': 4},
    {'holdout_fraction': 1.0},
    {'eps_max': -1.0},
])
def test_certify_rejects_invalid_config(oscillator_traj, overrides):
    with pytest.raises(InputError):
        certify_trajectory(oscillator_traj, CertifyConfig(**overrides))


def test_verdict_rejects_invalid_utf8(tmp_path):
    path = tmp_path / 'verdict.json'
    path.write_bytes(b'{"mode": "constant\xff"}')
    with pytest.raises(InputError, match='invalid UTF-8'):
        load_verdict(str(path))


@pytest.mark.parametrize('value, expected', [
    ('inf', np.inf),
    ('-inf', -np.inf),
    (3, 3.0),
    (0.25, 0.25),
])
def test_from_json_float_accepts_numbers_and_infinities(value, expected):
    assert from_json_float(value) == expected


@pytest.mark.parametrize('value', ['Infinity', '1.5', None, True, [1.0]])
def test_from_json_float_rejects_other_values(value):
    with pytest.raises(InputError, match='eps_max'):
        from_json_float(value, 'eps_max')


def test_verdict_rejects_textual_loss(tmp_path, oscillator_verdict):
    path = tmp_path / 'verdict.json'
    save_verdict(oscillator_verdict, str(path))
    data = json.loads(path.read_text())
    data['loss_final'] = 'zero'
    path.write_text(json.dumps(data))
    with pytest.raises(InputError, match='loss_final'):
        load_verdict(str(path))
