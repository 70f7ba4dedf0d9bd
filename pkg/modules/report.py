import logging
import os
from dataclasses import dataclass, field

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from config import Config
from database import save_record
from modules.certifier import NON_IMPLICATION_CAVEAT, Status, verdict_to_record
from modules.lyapunov import eval_V
from modules.timeseries import summarize
from utils.charts import line_chart_svg, surface_svg
from utils.helpers import dumps_sorted, format_fixed, format_float
from utils.validators import InputError, raise_if_errors, validate_grid_spec

logger = logging.getLogger(__name__)

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'templates')
REPORT_TEMPLATE = 'report.html'
MINUS = '−'
DOT = '·'


@dataclass(frozen=True)
class GridSpec:
    e_range: tuple
    edot_range: tuple
    resolution: int = Config.SURFACE_RESOLUTION

    def __post_init__(self):
        raise_if_errors(validate_grid_spec(self.e_range, self.edot_range, self.resolution))

    def to_dict(self):
        return {
            'e_range': list(self.e_range),
            'edot_range': list(self.edot_range),
            'resolution': self.resolution,
        }


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    e: np.ndarray
    edot: np.ndarray
    V: np.ndarray  # V[i, j] = V(e_i, ė_j)


@dataclass
class ReportBundle:
    verdict: object
    summary: dict
    traces: dict
    grid: GridSpec
    provenance: dict = field(default_factory=dict)


def format_candidate(cert):
    """V = a·e^2 ± b·e·e_dot + c·e_dot^2 for m = 1, a matrix listing otherwise"""
    Q = cert.Q.Q
    if Q.shape == (2, 2):
        a, cross, c = cert.coefficients
        sign = MINUS if cross < 0 else '+'
        return (
            f"V = {format_fixed(a)}{DOT}e^2 {sign} {format_fixed(abs(cross))}{DOT}e{DOT}e_dot "
            f"+ {format_fixed(c)}{DOT}e_dot^2"
        )
    rows = ['[' + ', '.join(format_fixed(v) for v in row) + ']' for row in Q]
    return 'V = xi^T Q xi, Q = [' + ', '.join(rows) + ']'


def candidate_rows(cert):
    """Q as rows of 4-decimal strings, for the matrix table"""
    return [[format_fixed(v) for v in row] for row in cert.Q.Q]


def _plane_state(n, e, edot):
    xi = np.zeros(n)
    xi[0] = e
    xi[n // 2] = edot
    return xi


def surface_grid(cert, e_range, edot_range, res):
    """V on the Cartesian (e, ė) grid; for m > 1 the (e_0, ė_0) plane"""
    spec = GridSpec(tuple(e_range), tuple(edot_range), res)
    e_values = np.linspace(spec.e_range[0], spec.e_range[1], res)
    edot_values = np.linspace(spec.edot_range[0], spec.edot_range[1], res)
    n = cert.Q.n
    V = np.empty((res, res))
    for i, e in enumerate(e_values):
        for j, edot in enumerate(edot_values):
            V[i, j] = eval_V(cert.Q, _plane_state(n, e, edot))
    return SurfaceGrid(e_values, edot_values, V)


def default_grid(traj, resolution=Config.SURFACE_RESOLUTION, margin=Config.SURFACE_MARGIN):
    """Symmetric ranges covering the observed error and its derivative"""
    e_max = float(np.max(np.abs(traj.xi[:, 0]))) * margin or 1.0
    edot_max = float(np.max(np.abs(traj.xi[:, traj.m]))) * margin or 1.0
    return GridSpec((-e_max, e_max), (-edot_max, edot_max), resolution)


def build_bundle(verdict, traj, provenance=None, grid=None):
    """Collect everything the renderers need; no clock reads"""
    grid = grid or default_grid(traj)
    m = traj.m
    traces = {
        't': traj.t_xi.tolist(),
        'e': traj.xi[:, :m].T.tolist(),
        'edot': traj.xi[:, m:].T.tolist(),
    }
    return ReportBundle(verdict, summarize(traj), traces, grid, dict(provenance or {}))


def bundle_to_dict(bundle):
    data = {
        'verdict': verdict_to_record(bundle.verdict).to_dict(),
        'trajectory': bundle.summary,
        'traces': bundle.traces,
        'surface': bundle.grid.to_dict(),
        'provenance': bundle.provenance,
    }
    if bundle.verdict.certificate is not None:
        grid = surface_grid(bundle.verdict.certificate, bundle.grid.e_range, bundle.grid.edot_range,
                            bundle.grid.resolution)
        data['surface']['V'] = grid.V.tolist()
    return data


def _environment():
    return Environment(
        loader=FileSystemLoader(TEMPLATE_DIR),
        autoescape=select_autoescape(['html']),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def _trace_svg(bundle, key, label):
    t = bundle.traces['t']
    series = [
        {'x': t, 'y': values, 'label': f"{label}_{i}" if len(bundle.traces[key]) > 1 else label}
        for i, values in enumerate(bundle.traces[key])
    ]
    return line_chart_svg(series, x_label='t [s]', y_label=label)


def render_html(bundle):
    """Render the report document as text"""
    verdict = bundle.verdict
    outcome = verdict.outcome
    cert = verdict.certificate
    config = verdict.config

    surface = None
    if cert is not None:
        grid = surface_grid(cert, bundle.grid.e_range, bundle.grid.edot_range, bundle.grid.resolution)
        surface = surface_svg(grid.e, grid.edot, grid.V)

    epochs = list(range(len(outcome.loss_history)))
    context = {
        'title': 'Stability Analysis Report',
        'status': verdict.status.value,
        'status_label': verdict.status.value.replace('_', ' ').upper(),
        'certified': verdict.status is Status.CERTIFIED,
        'reason': verdict.reason,
        'caveat': NON_IMPLICATION_CAVEAT,
        'formula': format_candidate(cert) if cert else None,
        'matrix': candidate_rows(cert) if cert else None,
        'epsilon_text': format_fixed(cert.epsilon) if cert else None,
        'gamma_text': format_float(config.train.gamma),
        'epsilon_holdout_text': format_fixed(verdict.epsilon_holdout) if verdict.epsilon_holdout is not None else None,
        'mode': config.train.mode,
        'nonconstancy_text': format_float(verdict.nonconstancy) if verdict.nonconstancy is not None else None,
        'termination': outcome.termination.value,
        'epochs_run': outcome.epochs_run,
        'final_loss_text': format_float(outcome.final_loss),
        'summary': bundle.summary,
        'surface_svg': surface,
        'error_svg': _trace_svg(bundle, 'e', 'e'),
        'error_rate_svg': _trace_svg(bundle, 'edot', 'e_dot'),
        'loss_svg': line_chart_svg([{'x': epochs, 'y': outcome.loss_history.tolist(), 'label': 'loss'}],
                                   x_label='epoch', y_label='mean hinge loss', log_y=True),
        'config_json': dumps_sorted(config.to_dict()),
        'provenance': sorted(bundle.provenance.items()),
    }
    return _environment().get_template(REPORT_TEMPLATE).render(**context)


def render_report(bundle, out_path, fmt='html'):
    """Write the report as html (default) or as the JSON bundle"""
    if fmt == 'json':
        text = save_record(out_path, bundle_to_dict(bundle))
    elif fmt == 'html':
        text = render_html(bundle)
        directory = os.path.dirname(os.path.abspath(out_path))
        os.makedirs(directory, exist_ok=True)
        with open(out_path, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(text)
    else:
        raise InputError(f"Unknown report format: {fmt}")
    logger.info("Wrote %s report to %s", fmt, out_path)
    return text
