import json
import os
import re

import numpy as np
import pytest

from database.models import VerdictRecord
from modules.certifier import (
    CertifyConfig,
    QuadraticCertificate,
    Status,
    Verdict,
    verdict_from_record,
)
from modules.learner import Termination, TrainOutcome
from modules.lyapunov import QuadraticForm, eval_V
from modules.report import (
    GridSpec,
    build_bundle,
    bundle_to_dict,
    candidate_rows,
    default_grid,
    format_candidate,
    render_html,
    render_report,
    surface_grid,
)
from modules.timeseries import RawTrajectory, differentiate
from utils.validators import InputError

FLIGHT_Q = [[0.2425, -0.0134], [-0.0134, 0.4804]]
GOLDEN = os.path.join(os.path.dirname(__file__), 'golden', 'report_certified.html')


def certificate(Q, epsilon=0.0):
    return QuadraticCertificate(QuadraticForm(Q), 1e-3, epsilon)


@pytest.fixture
def damped_cosine_traj():
    t = np.linspace(0.0, 10.0, 21)
    e = np.exp(-0.1 * t) * np.cos(t)
    return differentiate(RawTrajectory(t, e, np.zeros_like(e)), 0.5)


def fixed_verdict(status=Status.CERTIFIED):
    outcome = TrainOutcome(
        loss_history=np.array([1.0, 0.1, 0.01, 0.0]),
        param_norm_history=np.array([0.01, 0.2, 0.3, 0.31]),
        termination=Termination.CONVERGED if status is Status.CERTIFIED else Termination.EPOCH_LIMIT,
    )
    cert = certificate(FLIGHT_Q, 4.8871) if status is Status.CERTIFIED else None
    reason = 'hinge loss reached zero' if cert else 'no certificate: final loss 0.01 > tol 1e-09'
    return Verdict(status, outcome, certificate=cert, reason=reason, config=CertifyConfig(dt=0.5), m=1)


def test_format_candidate_coefficients():
    assert format_candidate(certificate(FLIGHT_Q)) == 'V = 0.2425·e^2 − 0.0268·e·e_dot + 0.4804·e_dot^2'


@pytest.mark.parametrize('Q, expected', [
    (np.eye(2), 'V = 1.0000·e^2 + 0.0000·e·e_dot + 1.0000·e_dot^2'),
    ([[2.0, 0.0], [0.0, 3.0]], 'V = 2.0000·e^2 + 0.0000·e·e_dot + 3.0000·e_dot^2'),
    ([[1.0, 0.25], [0.25, 1.0]], 'V = 1.0000·e^2 + 0.5000·e·e_dot + 1.0000·e_dot^2'),
])
def test_format_candidate_signs(Q, expected):
    assert format_candidate(certificate(Q)) == expected


def test_format_candidate_vector_error():
    text = format_candidate(certificate(np.eye(4)))
    assert text.startswith('V = xi^T Q xi, Q = [[1.0000, 0.0000, 0.0000, 0.0000]')
    assert candidate_rows(certificate(np.eye(4)))[3] == ['0.0000', '0.0000', '0.0000', '1.0000']


def test_surface_grid_identity():
    grid = surface_grid(certificate(np.eye(2)), (-1.0, 1.0), (-1.0, 1.0), 3)
    np.testing.assert_array_equal(grid.e, [-1.0, 0.0, 1.0])
    assert grid.V[0, 0] == 2.0
    assert grid.V[2, 2] == 2.0
    assert grid.V[1, 1] == 0.0


def test_surface_grid_is_even_and_non_negative():
    cert = certificate(FLIGHT_Q)
    grid = surface_grid(cert, (-2.0, 2.0), (-3.0, 3.0), 11)
    assert np.all(grid.V >= 0)
    np.testing.assert_allclose(grid.V, grid.V[::-1, ::-1], rtol=1e-12, atol=0)
    assert grid.V[4, 7] == eval_V(cert.Q, [grid.e[4], grid.edot[7]])


def test_surface_grid_on_vector_error_uses_first_plane():
    grid = surface_grid(certificate(np.diag([1.0, 5.0, 2.0, 7.0])), (-1.0, 1.0), (-1.0, 1.0), 3)
    assert grid.V[2, 1] == 1.0
    assert grid.V[1, 2] == 2.0


@pytest.mark.parametrize('e_range, edot_range, res', [
    ((1.0, 1.0), (-1.0, 1.0), 5),
    ((-1.0, 1.0), (2.0, -2.0), 5),
    ((-1.0, 1.0), (-1.0, 1.0), 1),
    ((-np.inf, 1.0), (-1.0, 1.0), 5),
])
def test_invalid_grid_spec(e_range, edot_range, res):
    with pytest.raises(InputError):
        GridSpec(e_range, edot_range, res)


def test_default_grid_covers_samples(damped_cosine_traj):
    grid = default_grid(damped_cosine_traj)
    assert grid.e_range[0] == -grid.e_range[1]
    assert grid.e_range[1] >= np.max(np.abs(damped_cosine_traj.xi[:, 0]))
    assert grid.edot_range[1] >= np.max(np.abs(damped_cosine_traj.xi[:, 1]))


def test_certified_report(damped_cosine_traj):
    html = render_html(build_bundle(fixed_verdict(), damped_cosine_traj))
    assert 'epsilon = 4.8871' in html
    assert 'V = 0.2425·e^2 − 0.0268·e·e_dot + 0.4804·e_dot^2' in html
    assert 'CERTIFIED' in html
    assert '<svg' in html
    assert 'id="caveat"' not in html


def test_not_found_report_carries_caveat(damped_cosine_traj):
    html = render_html(build_bundle(fixed_verdict(Status.NOT_FOUND), damped_cosine_traj))
    assert 'NOT FOUND' in html
    assert 'does not, in itself, imply that the system is unstable' in html
    assert 'No surface' in html
    assert 'epsilon = ' not in html


def test_report_escapes_provenance(damped_cosine_traj):
    bundle = build_bundle(fixed_verdict(), damped_cosine_traj, provenance={'input': '<run>.csv'})
    assert '&lt;run&gt;.csv' in render_html(bundle)


def test_render_is_deterministic(tmp_path, damped_cosine_traj):
    bundle = build_bundle(fixed_verdict(), damped_cosine_traj, provenance={'input': 'run.csv'})
    render_report(bundle, str(tmp_path / 'a.html'))
    render_report(bundle, str(tmp_path / 'b.html'))
    assert (tmp_path / 'a.html').read_bytes() == (tmp_path / 'b.html').read_bytes()


def test_json_bundle(tmp_path, damped_cosine_traj):
    bundle = build_bundle(fixed_verdict(), damped_cosine_traj, provenance={'seed': 0})
    path = tmp_path / 'report.json'
    render_report(bundle, str(path), fmt='json')
    data = json.loads(path.read_text())
    assert data['verdict']['epsilon'] == 4.8871
    assert data['trajectory']['sample_count'] == 19
    assert len(data['surface']['V']) == bundle.grid.resolution
    assert data['provenance'] == {'seed': 0}
    assert data == bundle_to_dict(bundle)

    verdict = verdict_from_record(VerdictRecord.from_dict(data['verdict']))
    assert verdict.status is Status.CERTIFIED
    assert verdict.certificate.epsilon == 4.8871
    np.testing.assert_array_equal(verdict.certificate.Q.Q, FLIGHT_Q)


def test_unknown_report_format(tmp_path, damped_cosine_traj):
    with pytest.raises(InputError, match='format'):
        render_report(build_bundle(fixed_verdict(), damped_cosine_traj), str(tmp_path / 'r.pdf'), fmt='pdf')


def mask_charts(html):
    return re.sub(r'<svg[\s\S]*?</svg>', '<svg/>', html)


def test_certified_report_matches_golden(damped_cosine_traj):
    bundle = build_bundle(fixed_verdict(), damped_cosine_traj, provenance={'input': 'golden.csv', 'seed': 0})
    html = mask_charts(render_html(bundle))
    if os.environ.get('LYACERT_UPDATE_GOLDEN') == '1':
        with open(GOLDEN, 'w', encoding='utf-8', newline='\n') as handle:
            handle.write(html)
    assert os.path.exists(GOLDEN), f"missing {GOLDEN}; regenerate with LYACERT_UPDATE_GOLDEN=1"
    with open(GOLDEN, encoding='utf-8', newline='') as handle:
        assert handle.read() == html


def test_report_charts_are_inline_svg(damped_cosine_traj):
    html = render_html(build_bundle(fixed_verdict(), damped_cosine_traj))
    assert html.count('<svg') == 4
    assert html.count('</svg>') == 4
    assert 'V max = ' in html
    assert 'mean hinge loss (log scale)' in html
