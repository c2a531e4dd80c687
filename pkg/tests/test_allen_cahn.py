# tests/test_allen_cahn.py
import math

import numpy as np
import pytest

from app.exceptions import DomainError, InputError
from app.models import Grid, Potential
from app.services.allen_cahn_service import (critical_point, energy, energy_density,
                                             first_variation, perturbed_first_variation,
                                             perturbed_functional, second_variation,
                                             sigma_constant, spectrum, stationary_constants)
from app.services.domain_service import flat_metric, integrate, neck_metric, volume

EPS = 0.1


@pytest.fixture
def potential():
    return Potential()


@pytest.fixture(params=['flat', 'neck'])
def metric(request):
    grid = Grid((16, 16), (1.0, 1.0))
    return flat_metric(grid) if request.param == 'flat' else neck_metric(grid, 0.4)


def _fields(g, count, seed=11):
    rng = np.random.default_rng(seed)
    return [0.8 * np.tanh(rng.standard_normal(g.grid.shape)) for _ in range(count)]


def test_sigma_of_the_standard_well(potential):
    assert sigma_constant(potential) == pytest.approx(math.sqrt(2.0) / 3.0, rel=1e-14)


def test_constant_energies(potential):
    g = flat_metric(Grid((16,), (1.0,)))
    assert energy(np.ones(16), EPS, g, potential).total == 0.0
    assert energy(-np.ones(16), EPS, g, potential).total == 0.0
    zero = energy(np.zeros(16), 0.3, g, potential).total
    assert zero == pytest.approx(0.25 / (2 * sigma_constant(potential) * 0.3), rel=1e-12)


def test_energy_density_integrates_to_energy(metric, potential):
    u = _fields(metric, 1)[0]
    assert integrate(energy_density(u, EPS, metric, potential), metric) == pytest.approx(
        energy(u, EPS, metric, potential).total, rel=1e-12)


def test_first_variation_is_the_gradient(metric, potential):
    sigma = sigma_constant(potential)
    t = 1e-6
    for u, v in zip(_fields(metric, 20, 1), _fields(metric, 20, 2)):
        plus = energy(u + t * v, EPS, metric, potential).total
        minus = energy(u - t * v, EPS, metric, potential).total
        numeric = (plus - minus) / (2 * t)
        exact = -integrate(first_variation(u, EPS, metric, potential) * v, metric) / (2 * sigma)
        assert numeric == pytest.approx(exact, rel=1e-6, abs=1e-8)


def test_second_variation_is_the_hessian(metric, potential):
    sigma = sigma_constant(potential)
    t = 1e-4
    for u, v in zip(_fields(metric, 20, 3), _fields(metric, 20, 4)):
        center = energy(u, EPS, metric, potential).total
        plus = energy(u + t * v, EPS, metric, potential).total
        minus = energy(u - t * v, EPS, metric, potential).total
        numeric = (plus - 2 * center + minus) / t ** 2
        exact = second_variation(u, v, EPS, metric, potential) / (2 * sigma)
        assert numeric == pytest.approx(exact, rel=1e-5, abs=1e-6)


def test_perturbed_functional_pairing(metric, potential):
    sigma = sigma_constant(potential)
    mu, t = 0.7, 1e-6
    u, v = _fields(metric, 2, 5)
    numeric = (perturbed_functional(u + t * v, EPS, mu, metric, potential)
               - perturbed_functional(u - t * v, EPS, mu, metric, potential)) / (2 * t)
    exact = -integrate(perturbed_first_variation(u, EPS, mu, metric, potential) * v, metric) / (2 * sigma)
    assert numeric == pytest.approx(exact, rel=1e-6, abs=1e-8)


def test_perturbed_functional_rejects_negative_mu(metric, potential):
    with pytest.raises(InputError):
        perturbed_functional(np.zeros(metric.grid.shape), EPS, -1.0, metric, potential)


def test_stationary_constants_sit_above_the_wells(potential):
    k_minus, k_plus = stationary_constants(EPS, 0.5, potential)
    assert potential.dW(k_plus) == pytest.approx(EPS * 0.5, abs=1e-12)
    assert potential.dW(k_minus) == pytest.approx(EPS * 0.5, abs=1e-12)
    assert -1.0 < k_minus < -0.9
    assert k_plus == pytest.approx(1.0 + EPS * 0.5 / 2.0, abs=1e-3)
    with pytest.raises(DomainError):
        stationary_constants(0.3, 100.0, potential)


def test_spectrum_of_the_wells(potential):
    g = flat_metric(Grid((16,), (1.0,)))
    report = spectrum(-np.ones(16), EPS, g, potential, k=2)
    assert report.lowest == pytest.approx(2.0 / EPS, rel=1e-10)
    assert report.index == 0
    assert report.strictly_stable


def test_constant_zero_has_index_one(potential):
    g = flat_metric(Grid((16,), (1.0,)))
    cp = critical_point(np.zeros(16), 0.3, g, potential, k=3)
    assert cp.residual == 0.0
    assert cp.spectrum.lowest == pytest.approx(-1.0 / 0.3, rel=1e-10)
    assert cp.spectrum.index == 1
    assert cp.verdict == 'index 1'


def test_spectrum_rejects_bad_k(potential):
    g = flat_metric(Grid((16,), (1.0,)))
    with pytest.raises(InputError):
        spectrum(np.zeros(16), EPS, g, potential, k=0)


def test_energy_rejects_nan(potential):
    g = flat_metric(Grid((16,), (1.0,)))
    u = np.zeros(16)
    u[3] = np.nan
    with pytest.raises(InputError):
        energy(u, EPS, g, potential)


def test_potential_is_even_and_c2(potential):
    x = np.linspace(0.0, 3.0, 301)
    assert np.allclose(potential.W(x), potential.W(-x))
    assert np.allclose(potential.dW(x), -potential.dW(-x))
    for edge in (2.0, 2.5):
        for k in (potential.W, potential.dW, potential.d2W):
            assert k(edge - 1e-9) == pytest.approx(k(edge + 1e-9), abs=1e-6)
    assert volume(flat_metric(Grid((8,), (1.0,)))) == pytest.approx(1.0)
