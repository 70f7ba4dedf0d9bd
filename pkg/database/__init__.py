# database/__init__.py
import json
import logging
import os

from utils.helpers import dumps_sorted
from utils.validators import InputError

logger = logging.getLogger(__name__)


def save_record(path, data):
    """Write a record as deterministic JSON (sorted keys, trailing newline)"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    text = dumps_sorted(data) + '\n'
    with open(path, 'w', encoding='utf-8', newline='\n') as handle:
        handle.write(text)
    logger.info("Saved record to %s", path)
    return text


def load_record(path):
    """Read a JSON record written by save_record"""
    try:
        with open(path, encoding='utf-8') as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc
