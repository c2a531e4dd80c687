# tests/test_scenario.py
import os

import pytest

from app.exceptions import ConfigError
from app.services.domain_service import neck_metric
from app.services.scenario_service import (build_metric_for, build_potential, build_surface,
                                           load_scenario, parse_scenario, validate_config)

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'scenarios')

NECK = """
[run]
eps = 0.05, 0.1
admissibility = report

[grid]
dims = 16, 32
lengths = 4, 2

[metric]
family = neck
amplitude = 0.4

[surface]
level = 0.5

[flow]
max_steps = 100
"""


def _fields(errors):
    return [field for field, _ in errors]


def test_empty_config_lists_missing_keys():
    fields = _fields(validate_config(''))
    assert 'grid.dims' in fields
    assert 'grid.lengths' in fields
    assert 'run.eps' in fields


def test_eps_outside_range():
    errors = validate_config({'grid': {'dims': '16', 'lengths': '1'}, 'run': {'eps': '0.5'}})
    assert _fields(errors) == ['run.eps']


def test_mismatched_axes():
    errors = validate_config({'grid': {'dims': '16,16', 'lengths': '1'}, 'run': {'eps': '0.1'}})
    assert 'grid.lengths' in _fields(errors)


def test_neck_needs_two_axes():
    errors = validate_config({'grid': {'dims': '16', 'lengths': '1'}, 'run': {'eps': '0.1'},
                              'metric': {'family': 'neck'}})
    assert 'metric.family' in _fields(errors)


def test_non_numeric_tolerance_and_unknown_family():
    errors = validate_config({'grid': {'dims': '16', 'lengths': '1'}, 'run': {'eps': '0.1'},
                              'metric': {'family': 'sphere'}, 'tolerances': {'err_constant': 'big'}})
    assert set(_fields(errors)) == {'metric.family', 'tolerances.err_constant'}


def test_missing_seed_file(tmp_path):
    errors = validate_config({'grid': {'dims': '16', 'lengths': '1'},
                              'run': {'eps': '0.1', 'seeds': 'nowhere.txt'}}, str(tmp_path))
    assert _fields(errors) == ['run.seeds']


def test_parse_scenario():
    scenario = parse_scenario(NECK, name='small-neck')
    assert scenario.name == 'small-neck'
    assert scenario.eps == [0.1, 0.05]
    assert scenario.metric_params == {'amplitude': 0.4}
    assert scenario.flow == {'max_steps': 100}
    assert scenario.admissibility == 'report'
    g = build_metric_for(scenario)
    assert g.family == 'neck'
    assert build_surface(scenario, g).level == 8
    assert build_potential(scenario).kind == 'standard'


def test_invalid_scenario_raises_with_every_error():
    with pytest.raises(ConfigError) as info:
        parse_scenario({'grid': {'dims': '4'}, 'run': {'eps': '1'}})
    fields = _fields(info.value.errors)
    assert 'grid.dims' in fields and 'grid.lengths' in fields and 'run.eps' in fields


@pytest.mark.parametrize('name', ['neck-2d', 'circle-1d'])
def test_shipped_scenarios_are_valid(name):
    scenario = load_scenario(name, SCENARIO_DIR)
    assert scenario.name == name
    assert scenario.source.endswith(f'{name}.ini')


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        load_scenario('no-such-scenario', SCENARIO_DIR)


def test_neck_scenario_builds_the_neck_metric():
    scenario = load_scenario('neck-2d', SCENARIO_DIR)
    g = build_metric_for(scenario)
    expected = neck_metric(g.grid, 0.5)
    assert (g.rho == expected.rho).all()
