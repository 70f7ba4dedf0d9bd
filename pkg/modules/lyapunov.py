from dataclasses import dataclass

import numpy as np

from utils.validators import InputError, InvariantError, raise_if_errors, validate_same_dimension

SYMMETRY_TOL = 1e-12


def packed_size(n):
    """Number of entries in an n x n lower triangle"""
    return n * (n + 1) // 2


def dimension_from_packed(size):
    """Inverse of packed_size; raises InputError when size is not triangular"""
    n = int((np.sqrt(8 * size + 1) - 1) / 2)
    if packed_size(n) != size:
        raise InputError(f"{size} is not a triangular number of entries")
    return n


@dataclass(frozen=True, eq=False)
class LowerTriangularFactor:
    """Cholesky factor L stored as its lower triangle in row-major order"""
    n: int
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float).ravel()
        if entries.size != packed_size(self.n):
            raise InputError(f"Expected {packed_size(self.n)} entries for n={self.n}, got {entries.size}")
        if not np.all(np.isfinite(entries)):
            raise InvariantError("Factor entries must be finite")
        object.__setattr__(self, 'entries', entries)
        diagonal = np.diag(self.matrix)
        if np.any(diagonal <= 0):
            raise InvariantError(f"Factor diagonal must be strictly positive, got {diagonal.tolist()}")

    @classmethod
    def from_matrix(cls, L):
        L = np.asarray(L, dtype=float)
        n = L.shape[0]
        if L.shape != (n, n):
            raise InputError("Factor must be square")
        if np.any(np.triu(L, 1) != 0):
            raise InvariantError("Factor must be lower triangular")
        return cls(n, L[np.tril_indices(n)])

    @property
    def matrix(self):
        L = np.zeros((self.n, self.n))
        L[np.tril_indices(self.n)] = self.entries
        return L


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """Symmetric matrix Q of the candidate V(ξ) = ξᵀQξ"""
    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise InputError(f"Q must be square, got shape {Q.shape}")
        if not np.all(np.isfinite(Q)):
            raise InvariantError("Q must be finite")
        scale = max(1.0, float(np.max(np.abs(Q))))
        if np.max(np.abs(Q - Q.T)) > SYMMETRY_TOL * scale:
            raise InvariantError("Q must be symmetric")
        Q.setflags(write=False)
        object.__setattr__(self, 'Q', Q)

    @property
    def n(self):
        return self.Q.shape[0]

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.Q)[0])

    def is_positive_definite(self):
        return self.min_eigenvalue() > 0


def assemble_Q(factor):
    """Q = LLᵀ"""
    if not isinstance(factor, LowerTriangularFactor):
        factor = LowerTriangularFactor.from_matrix(factor)
    L = factor.matrix
    Q = L @ L.T
    # Symmetrize away rounding in the two triangles
    return QuadraticForm(0.5 * (Q + Q.T))


def _as_matrix(Q):
    return Q.Q if isinstance(Q, QuadraticForm) else np.asarray(Q, dtype=float)


def _check_vector(Q, vector, name):
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (Q.shape[0],):
        raise InputError(f"{name} must have dimension {Q.shape[0]}, got shape {vector.shape}")
    return vector


def eval_V(Q, xi):
    """V(ξ) = ξᵀQξ"""
    Q = _as_matrix(Q)
    xi = _check_vector(Q, xi, 'xi')
    return float(xi @ Q @ xi)


def eval_Vdot(Q, xi, xidot):
    """V̇ = ξ̇ᵀQξ + ξᵀQξ̇ = 2ξᵀQξ̇ for symmetric Q"""
    Q = _as_matrix(Q)
    xi = _check_vector(Q, xi, 'xi')
    xidot = _check_vector(Q, xidot, 'xidot')
    return 2.0 * float(xi @ (Q @ xidot))


def vdot_samples(Q, xi, xidot):
    """V̇ at every sample; xi and xidot are (N, n)"""
    Q = _as_matrix(Q)
    xi = np.asarray(xi, dtype=float)
    xidot = np.asarray(xidot, dtype=float)
    raise_if_errors(validate_same_dimension(xi, xidot, 'xi and xidot'))
    if xi.ndim != 2 or xi.shape[1] != Q.shape[0]:
        raise InputError(f"Samples must be (N, {Q.shape[0]}), got {xi.shape}")
    return 2.0 * np.einsum('ki,ki->k', xi, xidot @ Q.T)


def v_samples(Q, xi):
    """V at every sample"""
    Q = _as_matrix(Q)
    xi = np.asarray(xi, dtype=float)
    return np.einsum('ki,ki->k', xi, xi @ Q.T)


def vdot_by_differencing(Q, traj):
    """Central difference of the series V(t_k); covers samples 1..N-2 of traj.xi.

    Oracle only: the trainer uses the chain rule.
    """
    values = v_samples(Q, traj.xi)
    return (values[2:] - values[:-2]) / (2.0 * traj.dt)
