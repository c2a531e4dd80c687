# tests/test_profiles.py
import math

import numpy as np
import pytest

from app.exceptions import DomainError, InputError
from app.models import Epsilon, Potential
from app.services.profile_service import (bump, bump_derivative, collapsing_energy,
                                          collapsing_family, energy_convergence_table,
                                          heteroclinic, layer_energy, profile_energy_1d,
                                          profile_table, smooth_step, truncate,
                                          truncation_residual)


def test_standard_heteroclinic_is_tanh():
    h = heteroclinic()
    r = np.linspace(-10, 10, 201)
    assert np.allclose(h(r), np.tanh(r / math.sqrt(2.0)))


def test_table_potential_heteroclinic_matches_closed_form():
    x = np.linspace(0.0, 3.0, 61)
    table = np.stack([x, Potential().W(x)], axis=1)
    h = heteroclinic(Potential('table', table=table))
    r = np.linspace(-6, 6, 49)
    assert np.allclose(h(r), np.tanh(r / math.sqrt(2.0)), atol=1e-4)


def test_table_potential_validation():
    x = np.linspace(0.0, 3.0, 61)
    w = Potential().W(x)
    with pytest.raises(DomainError):
        Potential('table', table=np.stack([x, w - 0.1], axis=1))
    with pytest.raises(InputError):
        Potential('table', table=np.stack([x[:20], w[:20]], axis=1))


@pytest.mark.parametrize('eps', [0.1, 0.05, 0.02])
def test_layer_energy_is_one(eps):
    assert layer_energy(eps) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize('eps', [0.2, 0.1, 0.05, 0.025])
def test_truncation_costs_at_most_eps_squared(eps):
    assert abs(layer_energy(eps, truncated=True) - 1.0) <= eps ** 2


def test_truncated_profile_has_exact_plateaus():
    eps = Epsilon(0.05)
    bar = truncate(heteroclinic(), eps)
    far = 2.0 * eps.Lambda + np.array([0.0, 0.5, 10.0])
    assert np.all(bar(far) == 1.0)
    assert np.all(bar(-far) == -1.0)
    near = np.linspace(-0.99, 0.99, 11) * eps.Lambda
    assert np.array_equal(bar(near), heteroclinic()(near))
    assert np.all(bar.scaled(2.0 * eps.value * eps.Lambda + 1e-3) == 1.0)


def test_cutoffs():
    s = np.array([-1.0, 0.0, 1.0, 2.0])
    assert np.array_equal(smooth_step(s), [0.0, 0.0, 1.0, 1.0])
    assert np.array_equal(bump(np.array([0.0, 1.0, 2.0, 3.0])), [1.0, 1.0, 0.0, 0.0])


def test_cutoff_shoulder_values():
    assert bump(1.0) == 1.0
    assert bump(-1.5) == pytest.approx(math.exp(-1.0 / 3.0))
    assert bump(1.5) == pytest.approx(math.exp(-1.0 / 3.0))
    assert bump(2.0) == 0.0
    s = np.linspace(1.05, 1.95, 19)
    h = 1e-6
    numeric = (bump(s + h) - bump(s - h)) / (2 * h)
    assert np.allclose(bump_derivative(s), numeric, atol=1e-6)
    assert np.allclose(bump_derivative(-s), -numeric, atol=1e-6)
    assert np.all(np.diff(bump(s)) < 0)


def test_collapsing_energy_decreases_to_zero():
    eps = Epsilon(0.05)
    end = 4.0 * eps.value * eps.Lambda
    t = np.linspace(0.0, end, 50)
    values = collapsing_energy(eps, t)
    assert np.all(np.diff(values) <= 0.0)
    assert values[-1] == 0.0
    # two transition layers
    assert values[0] == pytest.approx(2.0 * layer_energy(eps, truncated=True), rel=1e-4)


def test_collapsing_energy_matches_direct_quadrature():
    eps = Epsilon(0.05)
    p = Potential()
    end = 4.0 * eps.value * eps.Lambda
    for t in (0.0, 0.3 * end, 0.5 * end, 0.8 * end):
        psi = collapsing_family(eps, t, p)
        direct = profile_energy_1d(psi, psi.derivative, eps.value, p, -end, end)
        assert collapsing_energy(eps, t, p) == pytest.approx(direct, rel=1e-4, abs=1e-8)


def test_collapsing_profile_is_minus_one_at_the_end():
    eps = Epsilon(0.05)
    psi = collapsing_family(eps, 4.0 * eps.value * eps.Lambda)
    r = np.linspace(-1.0, 1.0, 41)
    assert np.all(psi(r) == -1.0)
    with pytest.raises(InputError):
        collapsing_family(eps, -1.0)


def test_truncation_residual_is_small():
    residual, constant = truncation_residual(0.05)
    assert residual < 1e-3
    assert constant == pytest.approx(residual / 0.05 ** 3)


def test_energy_convergence_table():
    table, slope = energy_convergence_table([0.1, 0.2, 0.05])
    assert table.columns == ['eps', 'Lambda', 'energy_H', 'energy_truncated', 'defect',
                             'residual_constant']
    assert table.column('eps') == [0.2, 0.1, 0.05]
    assert slope is not None
    assert all(abs(e - 1.0) < 1e-4 for e in table.column('energy_H'))


def test_profile_table_columns():
    table = profile_table(0.05, t=0.1, samples=11)
    assert table.columns == ['r', 'H', 'H_truncated', 'Psi_t']
    assert len(table.rows) == 11
    assert table.rows[0][2] == -1.0
