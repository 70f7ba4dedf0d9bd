import logging
import os

logger = logging.getLogger(__name__)


def _env_float(name, default):
    value = os.environ.get(name)
    if value in (None, ''):
        return default
    try:
        return float(value)
    except ValueError:
        logger.warning("Ignoring %s=%r: not a number, using %g", name, value, default)
        return default


class Config:
    VERSION = '0.3.0'

    # Preprocessing settings
    DEFAULT_DT = _env_float('LYACERT_DT', 30.0)  # seconds, flight-style data
    SMOOTHING_WINDOW = None  # odd moving-average width, off by default
    UNIFORM_GRID_RTOL = 1e-9

    # Training settings
    GAMMA = 1e-3
    LEARNING_RATE = 0.05
    EPOCHS = 5000
    THETA_MAX = 1e6
    TOL_LOSS = 1e-9
    MODE = 'constant'  # 'constant' or 'mlp'
    HIDDEN_SIZES = (16,)
    OPTIMIZER = 'gd'
    INIT_NOISE = 0.01
    SEED = 0

    # Certification settings
    EPS_MAX = float('inf')
    NONCONSTANCY_RTOL = 1e-6
    HOLDOUT_FRACTION = 0.0

    # Report settings
    SURFACE_RESOLUTION = 25
    SURFACE_MARGIN = 1.1

    # Synthetic data settings
    SYNTH_T_END = 60.0
    SYNTH_H = 0.1

    # Logging settings
    LOG_FILE = os.environ.get('LYACERT_LOG_FILE') or 'logs/lyacert.log'
    LOG_LEVEL = os.environ.get('LYACERT_LOG_LEVEL') or 'INFO'
    LOG_EVERY = 500  # epochs between training progress lines
