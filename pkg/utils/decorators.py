import logging
import time
from functools import wraps

import click

from utils.validators import InputError, InvariantError

logger = logging.getLogger(__name__)

EXIT_INPUT_ERROR = 1


def handle_errors(f):
    """Turn input, invariant and I/O failures into exit code 1 with a message on stderr"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except (InputError, InvariantError) as e:
            logger.error("%s failed: %s", f.__name__, e)
            click.echo(f"Error: {e}", err=True)
            return EXIT_INPUT_ERROR
        except OSError as e:
            logger.error("%s failed: %s", f.__name__, e)
            click.echo(f"Error: {e.strerror or e}: {e.filename}", err=True)
            return EXIT_INPUT_ERROR
    return decorated_function


def log_timing(stage):
    """Log how long a pipeline stage took"""
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            start = time.perf_counter()
            result = f(*args, **kwargs)
            logger.info("%s took %.3f s", stage, time.perf_counter() - start)
            return result
        return decorated_function
    return decorator
