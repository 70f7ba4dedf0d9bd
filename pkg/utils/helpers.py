import hashlib
import json
import math
import numbers

import numpy as np

from utils.validators import InputError

NON_FINITE = {'inf': math.inf, '-inf': -math.inf, 'nan': math.nan}


def file_sha256(path, chunk_size=65536):
    """Hex SHA-256 of a file, used for report provenance"""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for chunk in iter(lambda: handle.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def format_fixed(value, places=4):
    """Fixed-point formatting that never prints a negative zero"""
    text = f"{value:.{places}f}"
    if text.startswith('-') and float(text) == 0.0:
        text = text[1:]
    return text


def format_float(value):
    """Compact formatting for reasons and log lines"""
    if value is None:
        return 'n/a'
    if isinstance(value, float) and math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    return f"{value:.6g}"


def to_jsonable(value):
    """Convert numpy containers and scalars into plain JSON types"""
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return to_jsonable(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        # JSON has no infinities; keep them readable and reversible
        return 'inf' if value > 0 else ('-inf' if value < 0 else 'nan')
    return value


def from_json_float(value, name='value'):
    """Inverse of to_jsonable for scalar floats"""
    if isinstance(value, str):
        if value in NON_FINITE:
            return NON_FINITE[value]
        raise InputError(f"{name} must be a number or one of 'inf', '-inf', 'nan', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise InputError(f"{name} must be a number, got {value!r}")
    return float(value)


def dumps_sorted(data):
    """Deterministic JSON text (sorted keys, shortest round-trip floats)"""
    return json.dumps(to_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
