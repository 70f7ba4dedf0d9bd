from dataclasses import dataclass, field

from utils.helpers import from_json_float, to_jsonable
from utils.validators import InputError

# Fixed field names of the verdict document; never rename
VERDICT_FIELDS = ['mode', 'm', 'dt', 'gamma', 'Q', 'epsilon', 'termination', 'loss_final', 'seed', 'config']


@dataclass
class VerdictRecord:
    """Serialized verdict: the fixed fields first, then report extras"""
    mode: str
    m: int
    dt: float
    gamma: float
    Q: list  # row-major, None when no certificate
    epsilon: float  # None when no certificate
    termination: str
    loss_final: float
    seed: int
    config: dict
    verdict: str = 'not_found'  # 'certified', 'not_found' or 'diverged'
    reason: str = ''
    loss_history: list = field(default_factory=list)
    param_norm_history: list = field(default_factory=list)
    theta: list = None  # constant-mode parameters, when available
    epsilon_holdout: float = None
    nonconstancy: float = None

    def to_dict(self):
        return {
            'mode': self.mode,
            'm': self.m,
            'dt': self.dt,
            'gamma': self.gamma,
            'Q': to_jsonable(self.Q),
            'epsilon': self.epsilon,
            'termination': self.termination,
            'loss_final': to_jsonable(self.loss_final),
            'seed': self.seed,
            'config': to_jsonable(self.config),
            'verdict': self.verdict,
            'reason': self.reason,
            'loss_history': to_jsonable(self.loss_history),
            'param_norm_history': to_jsonable(self.param_norm_history),
            'theta': to_jsonable(self.theta),
            'epsilon_holdout': self.epsilon_holdout,
            'nonconstancy': self.nonconstancy,
        }

    @classmethod
    def from_dict(cls, data):
        missing = [name for name in VERDICT_FIELDS if name not in data]
        if missing:
            raise InputError(f"Verdict document is missing fields: {', '.join(missing)}")
        return cls(
            mode=data['mode'],
            m=int(data['m']),
            dt=float(data['dt']),
            gamma=float(data['gamma']),
            Q=data['Q'],
            epsilon=None if data['epsilon'] is None else float(data['epsilon']),
            termination=data['termination'],
            loss_final=from_json_float(data['loss_final'], 'loss_final'),
            seed=int(data['seed']),
            config=data['config'],
            verdict=data.get('verdict', 'not_found'),
            reason=data.get('reason', ''),
            loss_history=[from_json_float(v, 'loss_history') for v in data.get('loss_history', [])],
            param_norm_history=[from_json_float(v, 'param_norm_history') for v in data.get('param_norm_history', [])],
            theta=data.get('theta'),
            epsilon_holdout=data.get('epsilon_holdout'),
            nonconstancy=data.get('nonconstancy'),
        )
