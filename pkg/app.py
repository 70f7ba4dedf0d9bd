import logging
import os
import sys
from logging.handlers import RotatingFileHandler

import click
import numpy as np

from config import Config
from modules.certifier import CertifyConfig, Status, certify_trajectory, save_verdict, verdict_reason
from modules.learner import TrainConfig
from modules.report import build_bundle, render_report
from modules.synth import NoiseSpec, add_noise, damped_oscillator, exponential_growth, simulate
from modules.timeseries import load_trajectory, preprocess, resample, write_csv
from utils.decorators import handle_errors, log_timing
from utils.helpers import file_sha256
from utils.validators import InputError, raise_if_errors, validate_certify_config

EXIT_CODES = {
    Status.CERTIFIED: 0,
    Status.NOT_FOUND: 2,
    Status.DIVERGED: 3,
}
EXIT_USAGE = 1

_installed_handlers = []


def setup_logging(log_file=Config.LOG_FILE, level=Config.LOG_LEVEL):
    """Configure application logging"""
    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    directory = os.path.dirname(os.path.abspath(log_file))
    os.makedirs(directory, exist_ok=True)

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=10240000,  # 10MB
        backupCount=10,
        encoding='utf-8',
    )
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s %(levelname)s: %(message)s [in %(pathname)s:%(lineno)d]'
    ))
    file_handler.setLevel(getattr(logging, level.upper()))

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    console_handler.setLevel(logging.WARNING)

    for handler in (file_handler, console_handler):
        root.addHandler(handler)
        _installed_handlers.append(handler)
    root.setLevel(getattr(logging, level.upper()))


def parse_hidden(text):
    """'16,16' -> (16, 16)"""
    try:
        sizes = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise InputError(f"Hidden layer widths must be comma-separated integers, got {text!r}")
    if not sizes:
        raise InputError("At least one hidden layer width is required")
    return sizes


def resolve_seed(seed):
    """LYACERT_SEED wins over --seed when set"""
    value = os.environ.get('LYACERT_SEED')
    if value in (None, ''):
        return seed
    try:
        return int(value)
    except ValueError:
        raise InputError(f"LYACERT_SEED must be an integer, got {value!r}")


@log_timing('certification')
def run_certification(traj, config):
    return certify_trajectory(traj, config)


@click.group()
@click.version_option(Config.VERSION, prog_name='lyacert')
def cli():
    """Learn quadratic Lyapunov certificates from sampled trajectories."""


@cli.command()
@click.argument('input_path', metavar='INPUT')
@click.option('--dt', type=float, default=Config.DEFAULT_DT, show_default=True, help='Resampling interval [s].')
@click.option('--gamma', type=float, default=Config.GAMMA, show_default=True, help='Decrease margin.')
@click.option('--lr', type=float, default=Config.LEARNING_RATE, show_default=True, help='Learning rate.')
@click.option('--epochs', type=int, default=Config.EPOCHS, show_default=True)
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--mode', type=click.Choice(['constant', 'mlp']), default=Config.MODE, show_default=True)
@click.option('--hidden', default=','.join(str(h) for h in Config.HIDDEN_SIZES), show_default=True,
              help='Comma-separated hidden layer widths (mlp mode).')
@click.option('--theta-max', type=float, default=Config.THETA_MAX, show_default=True)
@click.option('--tol-loss', type=float, default=Config.TOL_LOSS, show_default=True)
@click.option('--eps-max', type=float, default=Config.EPS_MAX, show_default=True)
@click.option('--window', type=int, default=Config.SMOOTHING_WINDOW, help='Odd moving-average width.')
@click.option('--holdout', type=float, default=Config.HOLDOUT_FRACTION, show_default=True,
              help='Trailing fraction of samples kept out of training.')
@click.option('--report', 'report_path', default='report.html', show_default=True)
@click.option('--format', 'fmt', type=click.Choice(['html', 'json']), default='html', show_default=True)
@click.option('--verdict', 'verdict_path', default=None, help='Also save the verdict record as JSON.')
@click.option('--log-file', default=Config.LOG_FILE, show_default=True)
@click.option('--log-level', default=Config.LOG_LEVEL, show_default=True)
@handle_errors
def certify(input_path, dt, gamma, lr, epochs, seed, mode, hidden, theta_max, tol_loss, eps_max, window,
            holdout, report_path, fmt, verdict_path, log_file, log_level):
    """Certify the trajectory in INPUT (.csv or .xlsx) and write the report."""
    setup_logging(log_file, log_level)
    logger = logging.getLogger('lyacert')

    seed = resolve_seed(seed)
    train_config = TrainConfig(
        gamma=gamma,
        learning_rate=lr,
        epochs=epochs,
        seed=seed,
        theta_max=theta_max,
        tol_loss=tol_loss,
        mode=mode,
        hidden_sizes=parse_hidden(hidden),
    )
    config = CertifyConfig(dt=dt, window=window, eps_max=eps_max, holdout_fraction=holdout, train=train_config)
    raise_if_errors(validate_certify_config(config))

    raw = load_trajectory(input_path)
    traj = preprocess(raw, dt, window=window)
    verdict = run_certification(traj, config)

    provenance = {
        'input': os.path.basename(input_path),
        'input_sha256': file_sha256(input_path),
        'seed': seed,
        'version': Config.VERSION,
    }
    render_report(build_bundle(verdict, traj, provenance), report_path, fmt=fmt)
    if verdict_path:
        save_verdict(verdict, verdict_path)

    click.echo(verdict_reason(verdict))
    logger.info("Verdict %s for %s", verdict.status.value, input_path)
    return EXIT_CODES[verdict.status]


@cli.command()
@click.option('-o', '--output', required=True, help='CSV file to write.')
@click.option('--damping', type=float, default=0.5, show_default=True)
@click.option('--freq', type=float, default=1.0, show_default=True, help='Natural frequency [rad/s].')
@click.option('--sigma', type=float, default=0.0, show_default=True, help='Measurement noise std.')
@click.option('--t-end', type=float, default=Config.SYNTH_T_END, show_default=True)
@click.option('--h', type=float, default=Config.SYNTH_H, show_default=True, help='RK4 step.')
@click.option('--seed', type=int, default=Config.SEED, show_default=True)
@click.option('--e0', type=float, default=None, help='Initial tracking error (1.0, or 0.1 with --unstable).')
@click.option('--unstable', is_flag=True, help='Generate e(t) = e0 * exp(rate * t) instead.')
@click.option('--rate', type=float, default=0.5, show_default=True)
@click.option('--dt', type=float, default=None, help='Resample before writing.')
@click.option('--log-file', default=Config.LOG_FILE, show_default=True)
@handle_errors
def synth(output, damping, freq, sigma, t_end, h, seed, e0, unstable, rate, dt, log_file):
    """Write a synthetic tracking trajectory as CSV."""
    setup_logging(log_file)
    seed = resolve_seed(seed)

    if unstable:
        if not rate > 0:
            raise InputError("rate must be positive for an unstable system")
        e0 = 0.1 if e0 is None else e0
        system = exponential_growth(rate)
        xi0 = np.array([e0, rate * e0])
    else:
        e0 = 1.0 if e0 is None else e0
        system = damped_oscillator(damping, freq)
        xi0 = np.array([e0, 0.0])

    raw = add_noise(simulate(system, xi0, t_end, h), NoiseSpec(sigma=sigma, seed=seed))
    if dt is not None:
        raw = resample(raw, dt)
    write_csv(raw, output)
    click.echo(f"Wrote {len(raw)} samples to {output}")
    return 0


def main(argv=None):
    """Run the command line; returns the process exit code"""
    try:
        result = cli.main(args=argv, prog_name='lyacert', standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    return result if isinstance(result, int) else 0


if __name__ == '__main__':
    sys.exit(main())
