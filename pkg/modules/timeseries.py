import io
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config import Config
from utils.validators import (
    InputError,
    raise_if_errors,
    validate_raw_trajectory,
    validate_required_columns,
    validate_same_dimension,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RawTrajectory:
    """Time-stamped reference r(t) and observed state x(t), shape (N,) / (N, m)"""
    t: np.ndarray
    r: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        r = np.asarray(self.r, dtype=float)
        x = np.asarray(self.x, dtype=float)
        if r.ndim == 1:
            r = r.reshape(-1, 1)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        raise_if_errors(validate_raw_trajectory(t, r, x))
        for name, value in (('t', t), ('r', r), ('x', x)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def m(self):
        return self.r.shape[1]

    def __len__(self):
        return len(self.t)

    def to_dict(self):
        return {
            't': self.t.tolist(),
            'r': self.r.tolist(),
            'x': self.x.tolist(),
        }


@dataclass(frozen=True, eq=False)
class UniformTrajectory:
    """Error states on a uniform grid.

    ``t`` and ``e`` cover the whole grid; ``xi``/``xidot`` cover the interior
    samples only, i.e. ``t[1:-1]``.
    """
    dt: float
    m: int
    t: np.ndarray
    e: np.ndarray
    xi: np.ndarray
    xidot: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if self.xi.shape != self.xidot.shape or len(self.xi) < 1:
            raise InputError("xi and xidot must have equal, non-zero length")
        if self.xi.shape[1] != 2 * self.m:
            raise InputError(f"Error states must have dimension {2 * self.m}")

    @property
    def n(self):
        return 2 * self.m

    @property
    def t_xi(self):
        return self.t[1:-1]

    def __len__(self):
        return len(self.xi)

    def select(self, index):
        """Keep only the error-state samples selected by ``index``"""
        xi = self.xi[index]
        if len(xi) == 0:
            raise InputError("Selection leaves no samples")
        return UniformTrajectory(self.dt, self.m, self.t, self.e, xi, self.xidot[index])


def tracking_error(r, x):
    """e = r - x"""
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    errors = validate_same_dimension(r, x, 'reference and state')
    if not errors and not (np.all(np.isfinite(r)) and np.all(np.isfinite(x))):
        errors.append("Reference and state values must be finite")
    raise_if_errors(errors)
    return r - x


def resample(raw, dt):
    """Linear interpolation onto t_first, t_first + dt, ... <= t_last"""
    span = raw.t[-1] - raw.t[0]
    if not dt > 0:
        raise InputError("dt must be positive")
    if dt > span:
        raise InputError(f"Trajectory span {span:g} s is shorter than dt = {dt:g} s")

    count = int(np.floor(span / dt + 1e-10)) + 1
    if count < 3:
        raise InputError(f"Resampling a {span:g} s span at dt = {dt:g} s leaves {count} grid points, need 3")
    grid = raw.t[0] + dt * np.arange(count)
    grid = np.minimum(grid, raw.t[-1])

    r = np.column_stack([np.interp(grid, raw.t, raw.r[:, j]) for j in range(raw.m)])
    x = np.column_stack([np.interp(grid, raw.t, raw.x[:, j]) for j in range(raw.m)])

    logger.debug("Resampled %d samples to %d at dt=%g", len(raw), count, dt)
    return RawTrajectory(grid, r, x)


def smooth(e, window):
    """Centered moving average of each column; odd window, shrinks at the ends"""
    if window is None or window == 1:
        return np.asarray(e, dtype=float)
    if window < 1 or window % 2 == 0:
        raise InputError("Smoothing window must be a positive odd integer")
    frame = pd.DataFrame(np.asarray(e, dtype=float))
    return frame.rolling(window, center=True, min_periods=1).mean().to_numpy()


def is_uniform(t, dt):
    """True when consecutive stamps are dt apart (relative 1e-9, plus float resolution of t)"""
    tol = Config.UNIFORM_GRID_RTOL * dt + 4 * np.finfo(float).eps * np.max(np.abs(t))
    return bool(np.all(np.abs(np.diff(t) - dt) <= tol))


def differentiate(raw, dt, window=None):
    """Central first and second differences of the tracking error.

    ξ_k = [e_k; ė_k] and ξ̇_k = [ė_k; ë_k] for every interior grid index k.
    """
    if not is_uniform(raw.t, dt):
        raise InputError(f"Time grid is not uniform with spacing {dt:g}; resample first")

    e = smooth(tracking_error(raw.r, raw.x), window)

    edot = (e[2:] - e[:-2]) / (2.0 * dt)
    eddot = (e[2:] - 2.0 * e[1:-1] + e[:-2]) / (dt * dt)

    xi = np.hstack([e[1:-1], edot])
    xidot = np.hstack([edot, eddot])

    return UniformTrajectory(float(dt), raw.m, raw.t.copy(), e, xi, xidot)


def preprocess(raw, dt, window=None):
    """resample followed by differentiate"""
    return differentiate(resample(raw, dt), dt, window=window)


def summarize(traj):
    """Summary used by the report"""
    return {
        't_start': float(traj.t[0]),
        't_end': float(traj.t[-1]),
        'dt': float(traj.dt),
        'm': int(traj.m),
        'grid_samples': int(len(traj.t)),
        'sample_count': int(len(traj)),
    }


def column_names(m, shorthand=True):
    if m == 1 and shorthand:
        return ['t', 'r', 'x']
    return ['t'] + [f'r_{i}' for i in range(m)] + [f'x_{i}' for i in range(m)]


def _frame_to_trajectory(frame, line_numbers, source):
    """Convert string cells to floats, reporting the first bad cell by line"""
    values = frame.apply(pd.to_numeric, errors='coerce')
    bad = values.isna().any(axis=1) | ~np.isfinite(values.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        row = int(np.argmax(bad.to_numpy()))
        raise InputError(f"{source}:{line_numbers[row]}: non-numeric or non-finite value")

    # float() parses write_csv output exactly
    data = frame.apply(lambda column: column.str.strip()).astype(float).to_numpy()
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0):
        row = int(np.argmax(steps <= 0)) + 1
        raise InputError(f"{source}:{line_numbers[row]}: time stamps must be strictly increasing")
    if len(t) < 3:
        raise InputError(f"{source}: at least 3 samples are required, got {len(t)}")

    m = (data.shape[1] - 1) // 2
    return RawTrajectory(t, data[:, 1:1 + m], data[:, 1 + m:])


def read_csv(path):
    """Read the trajectory CSV format; blank and '#' lines are skipped"""
    with open(path, 'rb') as handle:
        chunks = handle.read().splitlines()

    kept = []
    line_numbers = []
    for number, chunk in enumerate(chunks, start=1):
        try:
            line = chunk.decode('utf-8-sig' if number == 1 else 'utf-8')
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}:{number}: invalid UTF-8 (byte 0x{chunk[exc.start]:02x})") from exc
        stripped = line.strip()
        if not stripped or stripped.startswith('#'):
            continue
        kept.append(stripped)
        line_numbers.append(number)

    if not kept:
        raise InputError(f"{path}: no header row found")

    header = [name.strip() for name in kept[0].split(',')]
    errors = validate_required_columns(header)
    if errors:
        raise InputError(f"{path}:{line_numbers[0]}: " + '; '.join(errors))

    for text, number in zip(kept[1:], line_numbers[1:]):
        fields = text.split(',')
        if len(fields) != len(header):
            raise InputError(f"{path}:{number}: expected {len(header)} fields, got {len(fields)}")

    frame = pd.read_csv(io.StringIO('\n'.join(kept)), dtype=str, skipinitialspace=True)
    return _frame_to_trajectory(frame, line_numbers[1:], path)


def read_excel(path):
    """Read the same column layout from the first sheet of a workbook"""
    frame = pd.read_excel(path, sheet_name=0, dtype=str, engine='openpyxl')
    frame = frame.dropna(how='all')
    header = [str(name).strip() for name in frame.columns]
    errors = validate_required_columns(header)
    if errors:
        raise InputError(f"{path}:1: " + '; '.join(errors))
    # Sheet row numbers: header is row 1
    line_numbers = [int(index) + 2 for index in frame.index]
    return _frame_to_trajectory(frame, line_numbers, path)


def load_trajectory(path):
    """Load a RawTrajectory from .csv or .xlsx"""
    if not os.path.exists(path):
        raise InputError(f"Input file not found: {path}")
    suffix = os.path.splitext(path)[1].lower()
    if suffix in ('.xlsx', '.xlsm'):
        raw = read_excel(path)
    else:
        raw = read_csv(path)
    logger.info("Loaded %d samples (m=%d) from %s", len(raw), raw.m, path)
    return raw


def write_csv(raw, path):
    """Write the trajectory CSV format with round-trip float precision"""
    frame = pd.DataFrame(
        np.column_stack([raw.t, raw.r, raw.x]),
        columns=column_names(raw.m),
    )
    frame.to_csv(path, index=False, lineterminator='\n')
    logger.info("Wrote %d samples to %s", len(raw), path)
