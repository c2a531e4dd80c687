# tests/test_cli.py
import json
import math

import numpy as np
import pytest

from app import create_app
from app.controllers import reproduce_controller
from app.controllers.common import bound_status
from app.models import BoundCheck, Grid, RunReport
from app.services.storage_service import write_field


@pytest.fixture
def app_instance(tmp_path):
    app = create_app()
    app.config["TESTING"] = True
    app.config["OUTPUT_DIR"] = str(tmp_path / "out")
    yield app


@pytest.fixture
def runner(app_instance):
    return app_instance.test_cli_runner()


def payload(result):
    # log records may share the captured output; the JSON document is the indented block
    lines = result.output.splitlines()
    start = lines.index('{')
    end = lines.index('}', start)
    return json.loads('\n'.join(lines[start:end + 1]))


def test_check_config(runner):
    result = runner.invoke(args=['check-config', '--scenario', 'circle-1d'])
    assert result.exit_code == 0
    assert payload(result) == {'errors': [], 'scenario': 'circle-1d', 'valid': True}


def test_check_config_reports_bad_fields(runner, tmp_path):
    bad = tmp_path / 'bad.ini'
    bad.write_text('[grid]\ndims = 16\n[run]\neps = 0.9\n')
    result = runner.invoke(args=['check-config', '--scenario', str(bad)])
    assert result.exit_code == 2
    data = payload(result)
    assert data['valid'] is False
    assert data['error'] == 'ConfigError'
    assert any(line.startswith('grid.lengths') for line in data['errors'])
    assert any(line.startswith('run.eps') for line in data['errors'])


def test_profile1d(runner, tmp_path):
    out = tmp_path / 'profile'
    result = runner.invoke(args=['profile1d', '--eps', '0.05', '--out', str(out),
                                 '--convergence', '0.2,0.1,0.05'])
    assert result.exit_code == 0
    data = payload(result)
    assert data['energy_H'] == pytest.approx(1.0, abs=1e-4)
    assert data['energy_H_defect'] < 1e-4
    assert abs(data['energy_truncated'] - data['energy_H']) < 0.05 ** 2
    assert (out / 'profile1d' / 'profile.csv').is_file()
    assert (out / 'profile1d' / 'convergence.csv').is_file()


def test_profile1d_rejects_large_eps(runner):
    result = runner.invoke(args=['profile1d', '--eps', '0.5'])
    assert result.exit_code == 2
    assert payload(result)['error'] == 'InputError'


def test_admissible_needs_a_scenario(runner):
    result = runner.invoke(args=['admissible', '--scenario', 'no-such-scenario', '--eps', '0.1'])
    assert result.exit_code == 2
    assert payload(result)['error'] == 'ConfigError'


def test_varifold_mass_of_a_stored_field(runner, tmp_path):
    grid = Grid((512,), (2 * math.pi,))
    x = grid.axis(0)
    eps = 0.1
    u = np.tanh((x - math.pi / 2 - 1e-3) / (math.sqrt(2) * eps)) \
        * np.tanh((3 * math.pi / 2 + 1e-3 - x) / (math.sqrt(2) * eps))
    path = write_field(tmp_path / 'layers.txt', u, grid, eps=eps)
    result = runner.invoke(args=['varifold-mass', '--field', str(path), '--cluster-factor', '1'])
    assert result.exit_code == 0
    data = payload(result)
    assert data['eps'] == eps
    assert data['mass']['total'] == pytest.approx(2.0, rel=2e-2)
    assert data['multiplicity']['verdict'] == 1
    assert data['multiplicity']['interface']['components'] == 2


def test_varifold_mass_of_a_constant(runner, tmp_path):
    path = write_field(tmp_path / 'flat.txt', np.ones(16), Grid((16,), (1.0,)), eps=0.1)
    result = runner.invoke(args=['varifold-mass', '--field', str(path)])
    assert result.exit_code == 3
    assert payload(result)['error'] == 'EmptyInterface'


def test_minmax_on_a_short_circle(runner, tmp_path):
    scenario = tmp_path / 'short.ini'
    scenario.write_text('[run]\neps = 0.3\nadmissibility = report\n'
                        '[grid]\ndims = 16\nlengths = 1\n[minmax]\nnodes = 9\nmax_iter = 2000\n')
    result = runner.invoke(args=['minmax', '--scenario', str(scenario), '--out', str(tmp_path)])
    assert result.exit_code == 0
    data = payload(result)
    sigma = math.sqrt(2) / 3
    assert data['winner']['energy']['total'] == pytest.approx(0.25 / (2 * sigma * 0.3), rel=1e-6)
    assert data['winner']['spectrum']['index'] == 1


def test_bound_status(app_instance):
    with app_instance.app_context():
        assert bound_status([BoundCheck('energy', 1.0, 2.0, 0.0)]) == 0
        assert bound_status([BoundCheck('energy', 1.0, 2.0, 0.0),
                             BoundCheck('ordering', 3.0, 2.0, 0.0)]) == 4


def test_reproduce_exits_on_failed_bound_in_report_mode(runner, tmp_path, monkeypatch):
    seen = {}

    def pipeline(scenario, target, **kwargs):
        seen['mode'] = scenario.admissibility
        report = RunReport(scenario=scenario, version='')
        report.checks.append(BoundCheck('comparison ordering', 1e-3, 1e-9, 0.0))
        return report, None

    monkeypatch.setattr(reproduce_controller, 'run_pipeline', pipeline)
    scenario = tmp_path / 'loose.ini'
    scenario.write_text('[run]\neps = 0.3\nadmissibility = report\n[grid]\ndims = 16\nlengths = 1\n')
    result = runner.invoke(args=['reproduce', '--scenario', str(scenario), '--out', str(tmp_path)])
    assert result.exit_code == 4
    assert seen['mode'] == 'report'
    assert payload(result)['failed_checks'][0]['name'] == 'comparison ordering'

    result = runner.invoke(args=['reproduce', '--scenario', str(scenario), '--out', str(tmp_path),
                                 '--strict'])
    assert result.exit_code == 4
    assert seen['mode'] == 'strict'
