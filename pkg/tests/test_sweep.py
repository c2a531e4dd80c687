# tests/test_sweep.py
import json

import pytest

from app.exceptions import DomainError, InputError
from app.services.scenario_service import parse_scenario
from app.services.sweep_service import (SWEEP_COLUMNS, epsilon_sweep, new_state, prepare,
                                        run_pipeline, run_stages)

CIRCLE = {'run': {'eps': '0.2', 'admissibility': 'report'},
          'grid': {'dims': '16', 'lengths': '1'}}


@pytest.fixture
def circle():
    return parse_scenario(CIRCLE, name='tiny-circle')


def test_pipeline_stops_at_the_failing_stage(circle, tmp_path):
    report, error = run_pipeline(circle, str(tmp_path), version='test')
    assert isinstance(error, DomainError)
    assert error.details['stage'] == 'calibrate'
    statuses = {s.name: s.status for s in report.stages}
    assert statuses['calibrate'] == 'failed'
    assert set(statuses.values()) == {'failed', 'skipped'}
    assert not report.ok
    assert (tmp_path / 'timings.json').is_file()
    written = json.loads((tmp_path / 'report.json').read_text())
    assert written['version'] == 'test'
    assert written['results'] == {'eps': 0.2}


def test_report_is_reproducible(circle, tmp_path):
    run_pipeline(circle, str(tmp_path / 'a'))
    run_pipeline(circle, str(tmp_path / 'b'))
    first = (tmp_path / 'a' / 'report.json').read_bytes()
    assert first == (tmp_path / 'b' / 'report.json').read_bytes()


def test_run_stages_rejects_unknown_stage(circle):
    with pytest.raises(InputError):
        run_stages(prepare(circle), new_state(0.2), 'polish')


def test_run_stages_tags_the_stage(circle):
    with pytest.raises(DomainError) as info:
        run_stages(prepare(circle), new_state(0.2), 'path')
    assert info.value.details['stage'] == 'calibrate'


def test_sweep_needs_a_calibrated_surface(circle):
    with pytest.raises(DomainError):
        epsilon_sweep(circle)


def test_sweep_columns():
    assert SWEEP_COLUMNS[0] == 'eps' and SWEEP_COLUMNS[-1] == 'status'
