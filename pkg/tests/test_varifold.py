# tests/test_varifold.py
import math

import numpy as np
import pytest

from app.exceptions import EmptyInterface
from app.models import Grid, Potential
from app.services.allen_cahn_service import energy
from app.services.domain_service import flat_metric
from app.services.varifold_service import (coarea_mass, diffuse_mass, extract_interface,
                                           multiplicity, phi_transform)

EPS = 0.05


@pytest.fixture(scope='module')
def strip():
    return flat_metric(Grid((16, 512), (1.0, 8.0)))


def _layer(y, at):
    return np.tanh((y - at) / (math.sqrt(2) * EPS))


@pytest.fixture(scope='module')
def separated(strip):
    y = strip.grid.mesh()[-1]
    return _layer(y, 2.005) * -_layer(y, 6.005)


@pytest.fixture(scope='module')
def doubled(strip):
    y = strip.grid.mesh()[-1]
    return _layer(y, 3.805) * _layer(y, 4.205)


def test_phi_is_odd_and_spans_sigma():
    p = Potential()
    assert phi_transform(1.0, p) - phi_transform(-1.0, p) == pytest.approx(math.sqrt(2) / 3)
    s = np.linspace(-1.5, 1.5, 31)
    assert np.allclose(phi_transform(-s, p), -phi_transform(s, p))


def test_separated_layers_have_multiplicity_one(strip, separated):
    report = multiplicity(separated, strip, Potential(), EPS, cluster_factor=2.0)
    assert len(report.clusters) == 2
    assert report.verdict == 1
    for cluster in report.clusters:
        assert cluster.area == pytest.approx(1.0, rel=1e-6)
        assert cluster.ratio == pytest.approx(1.0, rel=3e-2)


def test_close_layers_have_multiplicity_two(strip, doubled):
    report = multiplicity(doubled, strip, Potential(), EPS, cluster_factor=2.0)
    assert report.interface.count == 2
    assert len(report.clusters) == 1
    assert report.clusters[0].components == 2
    assert report.verdict == 2


def test_mass_matches_energy_for_profiles(strip, separated):
    p = Potential()
    mass = diffuse_mass(separated, strip, p).total
    assert mass == pytest.approx(energy(separated, EPS, strip, p).total, rel=2e-2)
    assert mass == pytest.approx(2.0, rel=3e-2)


def test_coarea_agrees_with_mass(strip, separated):
    p = Potential()
    mass = diffuse_mass(separated, strip, p).total
    assert coarea_mass(separated, strip, p, levels=20) == pytest.approx(mass, rel=3e-2)


def test_mass_is_even(strip, separated):
    p = Potential()
    assert diffuse_mass(-separated, strip, p).total == pytest.approx(
        diffuse_mass(separated, strip, p).total, rel=1e-12)


def test_localized_mass(strip, separated):
    y = strip.grid.mesh()[-1]
    report = diffuse_mass(separated, strip, Potential(), regions={'lower': y < 4.0})
    assert report.localized['lower'] == pytest.approx(0.5 * report.total, rel=1e-3)


def test_interface_components(strip, separated):
    interface = extract_interface(separated, strip)
    assert interface.dimension == 1
    assert interface.count == 2
    assert interface.area == pytest.approx(2.0, rel=1e-6)


def test_constant_field_has_no_interface(strip):
    with pytest.raises(EmptyInterface):
        multiplicity(np.ones(strip.grid.shape), strip, Potential(), EPS)
