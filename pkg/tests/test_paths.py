# tests/test_paths.py
import numpy as np
import pytest

from app.exceptions import InputError, SchemeError
from app.models import Grid, Hypersurface, PathSegment, Potential
from app.services.domain_service import neck_metric
from app.services.geometry_service import calibrate
from app.services.path_service import (PathComposer, assemble_composite, empirical_thresholds,
                                       build_barrier, build_path, evenness_defect,
                                       profile_energy, push_out)

EPS = 0.02


@pytest.fixture(scope='module')
def neck():
    return neck_metric(Grid((32, 64), (8.0, 2.0)), 0.5)


@pytest.fixture(scope='module')
def constants(neck):
    return calibrate(Hypersurface(neck.grid, 0, np.zeros(32)), neck)


@pytest.fixture(scope='module')
def built(constants, neck):
    return build_path(constants, EPS, neck, Potential(), mode='report', max_samples=8)


def test_path_starts_at_minus_one(built):
    _, composite, _ = built
    assert np.all(composite.segments[0].first == -1.0)


def test_segments_weld_bitwise(built):
    _, composite, _ = built
    labels = [s.label for s in composite.segments]
    assert labels == ['slide', 'open', 'close', 'push']
    for left, right in zip(composite.segments[:-1], composite.segments[1:]):
        assert np.array_equal(left.last, right.first)


def test_fields_stay_in_range_and_even(built, constants, neck):
    _, composite, _ = built
    for segment in composite.segments:
        for u in segment.fields:
            assert u.min() >= -1.0 and u.max() <= 1.0
        assert segment.diagnostics['evenness_defect'] == pytest.approx(0.0, abs=1e-9)


def test_composite_target(built, constants):
    _, composite, _ = built
    assert composite.target == pytest.approx(2 * constants.area_M - constants.varsigma)
    assert composite.global_max == max(s.max_energy for s in composite.segments)
    assert composite.achieved_varsigma == pytest.approx(
        composite.target + composite.varsigma - composite.global_max)


def test_push_out_records_the_plateau(built):
    _, composite, _ = built
    names = [c.name for c in composite.segments[-1].checks]
    assert 'push-out plateau' in names
    assert 'hole energy bound' in [c.name for c in composite.segments[0].checks]


def test_push_out_saturates_the_tube(constants, neck):
    composer = PathComposer(constants, 0.002, neck, Potential(), max_samples=8)
    segment = push_out(composer)
    plateau = next(c for c in segment.checks if c.name == 'push-out plateau')
    assert plateau.passed
    assert plateau.value == 0.0
    assert segment.params[-1] >= constants.c0 - 2 * composer.width
    tube = np.abs(composer.s) <= 0.95 * constants.c0
    assert np.all(segment.last[tube] == 1.0)


def test_profile_energy_ledger(built):
    _, composite, _ = built
    segment = composite.segments[1]
    table = profile_energy(segment)
    assert table.columns == ['param', 'energy', 'running_max', 'bound', 'margin']
    assert len(table.rows) == len(segment)
    running = table.column('running_max')
    assert running == sorted(running)
    assert running[-1] == pytest.approx(segment.max_energy)


def test_weld_gap_is_rejected(constants, neck):
    shape = neck.grid.shape
    first = PathSegment('a', [0.0, 1.0], [-np.ones(shape), np.zeros(shape)], [])
    second = PathSegment('b', [0.0, 1.0], [np.zeros(shape) + 1e-15, np.ones(shape)], [])
    with pytest.raises(SchemeError):
        assemble_composite([first, second], constants)
    with pytest.raises(SchemeError):
        assemble_composite([second], constants)
    with pytest.raises(InputError):
        assemble_composite([], constants)


def test_evenness_defect_detects_asymmetry(neck):
    S = Hypersurface(neck.grid, 0, np.zeros(32))
    s = neck.grid.mesh()[-1]
    assert evenness_defect(np.cos(np.pi * s), S, neck) == pytest.approx(0.0, abs=1e-12)
    assert evenness_defect(np.sin(np.pi * s), S, neck) > 0.5


def test_empirical_thresholds():
    rows = [
        (0.1, {'opening bound': False, 'sliding bound': True}),
        (0.02, {'opening bound': True, 'sliding bound': True}),
        (0.05, {'opening bound': True, 'sliding bound': False}),
    ]
    assert empirical_thresholds(rows) == {'opening bound': 0.05, 'sliding bound': 0.02}
    assert empirical_thresholds([(0.01, {'x': False})]) == {'x': None}


def test_barrier_is_a_strict_subsolution(built):
    composer, _, _ = built
    barrier = build_barrier(composer)
    assert barrier.mu >= 1e-8 / EPS
    assert barrier.positivity_min > 0
    assert barrier.field.min() >= -1.0 and barrier.field.max() <= 1.0
    with pytest.raises(InputError):
        build_barrier(composer, mu=-1.0)
