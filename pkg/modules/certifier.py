import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from config import Config
from database import load_record, save_record
from database.models import VerdictRecord
from modules.learner import (
    CholeskyParams,
    Termination,
    TrainConfig,
    TrainOutcome,
    extract_certificate_matrix,
    train,
)
from modules.lyapunov import QuadraticForm, eval_Vdot
from modules.timeseries import preprocess
from utils.helpers import format_float, format_fixed, from_json_float
from utils.validators import InputError, InvariantError, raise_if_errors, validate_certify_config

logger = logging.getLogger(__name__)

NON_IMPLICATION_CAVEAT = (
    "failing to identify a Lyapunov candidate does not, in itself, imply that "
    "the system is unstable"
)
EPSILON_MATCH_TOL = 1e-12


class Status(str, Enum):
    CERTIFIED = 'certified'
    NOT_FOUND = 'not_found'
    DIVERGED = 'diverged'


@dataclass
class CertifyConfig:
    dt: float = Config.DEFAULT_DT
    window: int = Config.SMOOTHING_WINDOW
    eps_max: float = Config.EPS_MAX
    nonconstancy_rtol: float = Config.NONCONSTANCY_RTOL
    holdout_fraction: float = Config.HOLDOUT_FRACTION
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self):
        return {
            'dt': self.dt,
            'window': self.window,
            'eps_max': self.eps_max,
            'nonconstancy_rtol': self.nonconstancy_rtol,
            'holdout_fraction': self.holdout_fraction,
            'train': self.train.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            dt=float(data['dt']),
            window=data.get('window'),
            eps_max=from_json_float(data.get('eps_max', Config.EPS_MAX), 'eps_max'),
            nonconstancy_rtol=float(data.get('nonconstancy_rtol', Config.NONCONSTANCY_RTOL)),
            holdout_fraction=float(data.get('holdout_fraction', Config.HOLDOUT_FRACTION)),
            train=TrainConfig.from_dict(data.get('train', {})),
        )


@dataclass(frozen=True, eq=False)
class QuadraticCertificate:
    Q: QuadraticForm
    gamma: float
    epsilon: float

    def __post_init__(self):
        if not self.Q.is_positive_definite():
            raise InvariantError("Certificate matrix must be positive definite")
        if not self.epsilon >= 0:
            raise InvariantError("epsilon must be non-negative")

    @property
    def m(self):
        return self.Q.n // 2

    @property
    def coefficients(self):
        """(q_ee, q_cross, q_ėė) of V = q_ee·e² + q_cross·e·ė + q_ėė·ė², m = 1 only"""
        if self.Q.n != 2:
            raise InputError("Polynomial coefficients exist only for m = 1")
        Q = self.Q.Q
        return float(Q[0, 0]), float(2.0 * Q[0, 1]), float(Q[1, 1])


@dataclass
class Verdict:
    status: Status
    outcome: TrainOutcome
    certificate: QuadraticCertificate = None
    reason: str = ''
    config: CertifyConfig = None
    m: int = None
    epsilon_holdout: float = None
    nonconstancy: float = None

    @property
    def certified(self):
        return self.status is Status.CERTIFIED


def estimate_epsilon(Q, traj):
    """Smallest ε ≥ 0 with V̇(ξ_k) ≤ ε for every sample"""
    if len(traj) == 0:
        raise InputError("Cannot estimate epsilon on an empty trajectory")
    epsilon = 0.0
    for xi, xidot in zip(traj.xi, traj.xidot):
        epsilon = max(epsilon, eval_Vdot(Q, xi, xidot))
    return epsilon


def split_holdout(traj, fraction):
    """(training, held-out) with the trailing fraction held out"""
    if fraction <= 0:
        return traj, None
    cut = len(traj) - int(round(fraction * len(traj)))
    if cut < 1 or cut >= len(traj):
        raise InputError(f"Holdout fraction {fraction:g} leaves an empty split of {len(traj)} samples")
    return traj.select(slice(0, cut)), traj.select(slice(cut, None))


def certify_trajectory(traj, config):
    """Train and judge an already differentiated trajectory"""
    raise_if_errors(validate_certify_config(config))
    training, held_out = split_holdout(traj, config.holdout_fraction)

    outcome = train(training, config.train)
    verdict = Verdict(Status.NOT_FOUND, outcome, config=config, m=traj.m)

    if outcome.termination is Termination.DIVERGED:
        verdict.status = Status.DIVERGED
        verdict.reason = f"{outcome.reason} (final |theta|_inf = {format_float(outcome.final_param_norm)})"
        return verdict

    if outcome.termination is not Termination.CONVERGED:
        verdict.reason = f"no certificate: final loss {format_float(outcome.final_loss)} > tol {config.train.tol_loss:g}"
        return verdict

    Q, nonconstancy = extract_certificate_matrix(outcome.final_params, training)
    verdict.nonconstancy = nonconstancy
    limit = config.nonconstancy_rtol * float(np.max(np.abs(Q.Q)))
    if nonconstancy > limit:
        verdict.reason = (
            f"learned Q(xi) is not constant: max deviation {format_float(nonconstancy)} "
            f"exceeds {format_float(limit)}"
        )
        logger.warning("Refusing certification: %s", verdict.reason)
        return verdict
    if not Q.is_positive_definite():
        verdict.reason = "extracted Q is not positive definite"
        return verdict

    epsilon = estimate_epsilon(Q, training)
    if held_out is not None:
        verdict.epsilon_holdout = estimate_epsilon(Q, held_out)

    if epsilon > config.eps_max:
        verdict.reason = f"epsilon = {format_fixed(epsilon)} exceeds eps_max = {format_float(config.eps_max)}"
        return verdict

    verdict.status = Status.CERTIFIED
    verdict.certificate = QuadraticCertificate(Q, config.train.gamma, epsilon)
    verdict.reason = outcome.reason
    logger.info("Certified with epsilon=%.6g", epsilon)
    return verdict


def certify(raw, config):
    """resample -> differentiate -> train -> ε -> verdict"""
    raise_if_errors(validate_certify_config(config))
    traj = preprocess(raw, config.dt, window=config.window)
    logger.info("Preprocessed %d raw samples into %d error states (dt=%g)", len(raw), len(traj), config.dt)
    return certify_trajectory(traj, config)


def verdict_reason(verdict):
    """One-line human summary"""
    if verdict.status is Status.CERTIFIED:
        cert = verdict.certificate
        return (
            f"CERTIFIED: V-dot <= epsilon on all samples with epsilon = {format_fixed(cert.epsilon)} "
            f"(gamma = {cert.gamma:g})"
        )
    if verdict.status is Status.DIVERGED:
        head = f"DIVERGED: training diverged, {verdict.reason}"
    else:
        head = f"NOT FOUND: {verdict.reason}"
    return f"{head}; this does not imply instability ({NON_IMPLICATION_CAVEAT})"


def reassess_certificate(cert, traj):
    """Same V on other samples (e.g. fresh noisy observations): only ε changes"""
    if traj.n != cert.Q.n:
        raise InputError(f"Certificate is for n={cert.Q.n} but the trajectory has n={traj.n}")
    epsilon = estimate_epsilon(cert.Q, traj)
    logger.info("Reassessed certificate on %d samples: epsilon=%.6g", len(traj), epsilon)
    return QuadraticCertificate(cert.Q, cert.gamma, epsilon)


def verify_certificate(verdict, traj, tol=EPSILON_MATCH_TOL):
    """Independent re-check that V̇(ξ_k) <= ε + tol on every training sample"""
    cert = verdict.certificate
    return all(eval_Vdot(cert.Q, xi, xidot) <= cert.epsilon + tol for xi, xidot in zip(traj.xi, traj.xidot))


def verdict_to_record(verdict):
    config = verdict.config or CertifyConfig()
    outcome = verdict.outcome
    cert = verdict.certificate
    params = outcome.final_params
    return VerdictRecord(
        mode=config.train.mode,
        m=verdict.m,
        dt=config.dt,
        gamma=config.train.gamma,
        Q=cert.Q.Q.tolist() if cert else None,
        epsilon=cert.epsilon if cert else None,
        termination=outcome.termination.value,
        loss_final=outcome.final_loss,
        seed=config.train.seed,
        config=config.to_dict(),
        verdict=verdict.status.value,
        reason=verdict.reason,
        loss_history=outcome.loss_history.tolist(),
        param_norm_history=outcome.param_norm_history.tolist(),
        theta=params.theta.tolist() if isinstance(params, CholeskyParams) else None,
        epsilon_holdout=verdict.epsilon_holdout,
        nonconstancy=verdict.nonconstancy,
    )


def verdict_from_record(record, traj=None):
    """Rebuild a Verdict; with traj, ε is recomputed and must match"""
    config = CertifyConfig.from_dict(record.config)
    params = None
    if record.theta is not None:
        params = CholeskyParams(2 * record.m, record.theta)
    outcome = TrainOutcome(
        loss_history=np.array(record.loss_history, dtype=float),
        param_norm_history=np.array(record.param_norm_history, dtype=float),
        termination=Termination(record.termination),
        final_params=params,
        reason='',
    )
    certificate = None
    if record.Q is not None:
        Q = QuadraticForm(record.Q)
        if traj is not None:
            epsilon = estimate_epsilon(Q, traj)
            if abs(epsilon - record.epsilon) > EPSILON_MATCH_TOL * max(1.0, abs(epsilon)):
                raise InvariantError(f"Stored epsilon {record.epsilon!r} does not match recomputed {epsilon!r}")
        certificate = QuadraticCertificate(Q, record.gamma, record.epsilon)
    return Verdict(
        status=Status(record.verdict),
        outcome=outcome,
        certificate=certificate,
        reason=record.reason,
        config=config,
        m=record.m,
        epsilon_holdout=record.epsilon_holdout,
        nonconstancy=record.nonconstancy,
    )


def save_verdict(verdict, path):
    return save_record(path, verdict_to_record(verdict).to_dict())


def load_verdict(path, traj=None):
    return verdict_from_record(VerdictRecord.from_dict(load_record(path)), traj=traj)
