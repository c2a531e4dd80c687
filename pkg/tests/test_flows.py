# tests/test_flows.py
import math
from types import SimpleNamespace

import numpy as np
import pytest

from app.exceptions import DomainError, InputError, SchemeError
from app.models import FlowConfig, Grid, Potential
from app.services.allen_cahn_service import energy
from app.services.domain_service import flat_metric
from app.services import flow_service
from app.services.flow_service import (comparison_check, dichotomy, energy_growth_bound, flow,
                                       select_mu, two_stage_relax)
from app.services.geometry_service import fiber_coordinate

EPS = 0.2


@pytest.fixture(scope='module')
def circle():
    return flat_metric(Grid((64,), (2 * math.pi,)))


@pytest.fixture(scope='module')
def cfg():
    return FlowConfig.for_eps(EPS, max_steps=5000, snapshot_every=5)


@pytest.fixture(scope='module')
def x(circle):
    return circle.grid.axis(0)


def test_time_step_ceiling(circle):
    cfg = FlowConfig(dt=0.3 * EPS ** 2)
    with pytest.raises(InputError):
        flow(-np.ones(64), cfg, EPS, circle, Potential(), with_spectrum=False)


def test_flow_config_validation():
    with pytest.raises(InputError):
        FlowConfig(dt=0.0)
    with pytest.raises(InputError):
        FlowConfig(dt=1e-3, mu=-1.0)


def test_bump_relaxes_to_minus_one(circle, cfg, x):
    u0 = -1.0 + 0.1 * np.cos(x)
    result = flow(u0, cfg, EPS, circle, Potential(), with_spectrum=False)
    assert result.converged
    assert np.allclose(result.limit, -1.0, atol=1e-6)
    energies = result.trace.energy
    assert all(b <= a + 1e-12 for a, b in zip(energies[:-1], energies[1:]))


def test_stable_limit_has_positive_spectrum(circle, cfg, x):
    result = flow(1.0 - 0.1 * np.cos(x), cfg, EPS, circle, Potential())
    assert result.spectrum.strictly_stable
    assert result.spectrum.lowest == pytest.approx(2 / EPS, rel=1e-3)


def test_ordered_starts_stay_ordered(circle, cfg, x):
    p = Potential()
    low = flow(-1.0 + 0.05 * np.cos(x), cfg, EPS, circle, p, with_spectrum=False)
    high = flow(-0.9 + 0.1 * np.cos(x), cfg, EPS, circle, p, with_spectrum=False)
    verdict = comparison_check(high, low)
    assert verdict.holds
    assert verdict.samples > 0
    reversed_verdict = comparison_check(low, high, raise_on_violation=False)
    assert not reversed_verdict.holds


def test_comparison_needs_snapshots(circle, x):
    cfg = FlowConfig.for_eps(EPS, max_steps=50)
    result = flow(-np.ones(64), cfg, EPS, circle, Potential(), with_spectrum=False)
    with pytest.raises(InputError):
        comparison_check(result, result)


def test_select_mu_floor(circle):
    assert select_mu(-np.ones(64), EPS, circle, Potential()) == pytest.approx(1e-8 / EPS)


def test_unstable_constant_breaks_toward_plus_one(circle, cfg):
    result = flow(np.zeros(64), cfg, EPS, circle, Potential(), with_spectrum=False)
    assert any('tie-break' in note for note in result.trace.notes)
    assert result.converged
    assert np.allclose(result.limit, 1.0, atol=1e-6)
    assert dichotomy(result, EPS, circle, Potential()).case == 'a'


def test_dichotomy_rejects_minus_one(circle):
    with pytest.raises(DomainError):
        dichotomy(-np.ones(64), EPS, circle, Potential())


def test_dichotomy_non_constant_case(circle, x):
    verdict = dichotomy(np.tanh(np.sin(x)), EPS, circle, Potential())
    assert verdict.case == 'b'
    assert verdict.witness_ok is None


def test_energy_growth_bound(circle, x):
    p = Potential()
    cfg = FlowConfig.for_eps(EPS, max_steps=2000, mu=0.05)
    u0 = -1.0 + 0.1 * np.cos(x)
    result = flow(u0, cfg, EPS, circle, p, with_spectrum=False, monitor_sign=False)
    start = energy(u0, EPS, circle, p)
    check = energy_growth_bound(result, start.total, 0.05, circle, start.sigma)
    assert check.passed


def test_dissipation_tolerance_is_absolute(circle, x, monkeypatch):
    calls = []

    def drifting(u, e, mu, g, p):
        calls.append(None)
        return energy(u, e, g, p), 1000.0 + 5e-9 * len(calls)

    monkeypatch.setattr(flow_service, '_functional', drifting)
    cfg = FlowConfig.for_eps(EPS, max_steps=10)
    with pytest.raises(SchemeError):
        flow(-1.0 + 0.05 * np.cos(x), cfg, EPS, circle, Potential(), with_spectrum=False,
             monitor_sign=False)


@pytest.fixture(scope='module')
def strip():
    return flat_metric(Grid((8, 128), (1.0, 8.0)))


def _band(strip, half_width):
    s = fiber_coordinate(strip, 0)
    w = math.sqrt(2) * EPS
    return -1.0 + 0.5 * (1 + np.tanh((s + half_width) / w)) * (1 + np.tanh((half_width - s) / w))


@pytest.fixture(scope='module')
def relaxed(strip):
    cc = SimpleNamespace(area_M=2.0, tau=0.1, omega=4.0, surface=SimpleNamespace(level=0))
    return two_stage_relax(_band(strip, 1.5), _band(strip, 1.0), cc, EPS, strip, Potential(),
                           mu=0.5)


def test_two_stage_relax_fills_the_strip(relaxed):
    assert relaxed.first_stage.converged
    assert relaxed.barrier_stage.converged
    assert relaxed.dichotomy.case == 'a'
    assert relaxed.comparison.holds
    assert relaxed.witness_fill_time is not None
    assert relaxed.anomaly is None
    assert np.allclose(relaxed.critical_point.field, 1.0, atol=1e-6)


def test_two_stage_relax_checks_pass(relaxed):
    checks = {check.name: check for check in relaxed.checks}
    assert all(check.passed for check in checks.values())
    convexity = checks['barrier mean-convexity']
    assert convexity.slack == pytest.approx(1e-8 / EPS)


def test_barrier_flow_increases_nodewise(relaxed):
    trace = relaxed.barrier_stage.trace
    assert trace.dt_halvings == 0
    assert len(trace.snapshots) > 2
    for before, after in zip(trace.snapshots, trace.snapshots[1:]):
        assert np.all(after >= before - 1e-9)
