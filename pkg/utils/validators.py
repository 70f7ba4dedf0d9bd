import math

import numpy as np


class InputError(ValueError):
    """Malformed or inconsistent input data"""


class InvariantError(ValueError):
    """A domain object violated one of its invariants"""


VALID_MODES = ['constant', 'mlp']


def raise_if_errors(errors, exc_type=InputError):
    """Raise exc_type carrying every collected message, if any"""
    if errors:
        raise exc_type('; '.join(errors))


def validate_required_columns(header, m=None):
    """Validate a trajectory header: t,r_0..r_{m-1},x_0..x_{m-1} or t,r,x"""
    errors = []
    names = [name.strip() for name in header]

    if not names or names[0] != 't':
        errors.append("First column must be 't'")
        return errors

    if names == ['t', 'r', 'x']:
        return errors

    rest = names[1:]
    if len(rest) == 0 or len(rest) % 2 != 0:
        errors.append(f"Expected t followed by equal numbers of r_i and x_i columns, got {len(rest)} columns")
        return errors

    dim = len(rest) // 2
    expected = [f'r_{i}' for i in range(dim)] + [f'x_{i}' for i in range(dim)]
    if rest != expected:
        errors.append(f"Header must be t,{','.join(expected)}")
    if m is not None and dim != m:
        errors.append(f"Expected dimension {m}, header has {dim}")

    return errors


def validate_raw_trajectory(t, r, x, min_samples=3):
    """Validate RawTrajectory arrays"""
    errors = []

    if t.ndim != 1:
        errors.append("Time stamps must be one-dimensional")
        return errors
    if r.ndim != 2 or x.ndim != 2:
        errors.append("Reference and state samples must be 2-D (samples x dimension)")
        return errors
    if len(t) < min_samples:
        errors.append(f"At least {min_samples} samples are required, got {len(t)}")
    if r.shape != x.shape or r.shape[0] != len(t):
        errors.append(f"Shape mismatch: t {t.shape}, r {r.shape}, x {x.shape}")
        return errors
    if r.shape[1] < 1:
        errors.append("Dimension m must be at least 1")
    if not np.all(np.isfinite(t)):
        errors.append("Time stamps must be finite")
    elif np.any(np.diff(t) <= 0):
        k = int(np.argmax(np.diff(t) <= 0)) + 1
        errors.append(f"Time stamps must be strictly increasing (sample {k})")
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(x))):
        errors.append("Reference and state values must be finite")

    return errors


def validate_same_dimension(a, b, what='vectors'):
    """Validate that two vectors share a dimension"""
    if np.shape(a) != np.shape(b):
        return [f"Dimension mismatch between {what}: {np.shape(a)} vs {np.shape(b)}"]
    return []


def validate_positive(name, value, allow_zero=False):
    """Validate a finite positive scalar"""
    try:
        value = float(value)
    except (TypeError, ValueError):
        return [f"{name} must be a number"]
    if math.isnan(value):
        return [f"{name} must be a number"]
    if allow_zero and value < 0:
        return [f"{name} must be non-negative"]
    if not allow_zero and value <= 0:
        return [f"{name} must be positive"]
    return []


def validate_train_config(config, optimizers=()):
    """Validate training settings"""
    errors = []

    errors.extend(validate_positive('gamma', config.gamma))
    errors.extend(validate_positive('learning_rate', config.learning_rate, allow_zero=True))
    errors.extend(validate_positive('theta_max', config.theta_max))
    errors.extend(validate_positive('tol_loss', config.tol_loss, allow_zero=True))

    if not isinstance(config.epochs, int) or isinstance(config.epochs, bool) or config.epochs < 1:
        errors.append("epochs must be a positive integer")

    if not isinstance(config.seed, int) or isinstance(config.seed, bool) or not 0 <= config.seed < 2**64:
        errors.append("seed must be an unsigned 64-bit integer")

    if config.mode not in VALID_MODES:
        errors.append(f"mode must be one of: {', '.join(VALID_MODES)}")

    if config.mode == 'mlp':
        if any(not isinstance(h, int) or h < 1 for h in config.hidden_sizes):
            errors.append("hidden layer widths must be positive integers")

    if optimizers and config.optimizer not in optimizers:
        errors.append(f"optimizer must be one of: {', '.join(optimizers)}")

    return errors


def validate_certify_config(config):
    """Validate pipeline settings (the nested train config is validated separately)"""
    errors = []

    errors.extend(validate_positive('dt', config.dt))
    errors.extend(validate_positive('eps_max', config.eps_max, allow_zero=True))
    errors.extend(validate_positive('nonconstancy_rtol', config.nonconstancy_rtol, allow_zero=True))

    if config.window is not None:
        if not isinstance(config.window, int) or config.window < 1 or config.window % 2 == 0:
            errors.append("smoothing window must be a positive odd integer")

    if not 0.0 <= config.holdout_fraction < 1.0:
        errors.append("holdout fraction must be in [0, 1)")

    return errors


def validate_grid_spec(e_range, edot_range, resolution):
    """Validate a surface grid specification"""
    errors = []

    for name, bounds in (('e range', e_range), ('e_dot range', edot_range)):
        lo, hi = bounds
        if not (np.isfinite(lo) and np.isfinite(hi)):
            errors.append(f"{name} must be finite")
        elif lo >= hi:
            errors.append(f"{name} must satisfy low < high")

    if not isinstance(resolution, int) or resolution < 2:
        errors.append("Grid resolution must be an integer >= 2")

    return errors
