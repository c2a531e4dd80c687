# tests/test_geometry.py
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.csgraph import dijkstra

from app.exceptions import CalibrationError, DomainError, InputError
from app.models import Epsilon, Grid, Hypersurface, Metric
from app.services.domain_service import flat_metric, neck_metric
from app.services.geometry_service import (admissibility_threshold, area, calibrate,
                                           double_cover_splitting, eikonal_residual,
                                           epsilon_admissibility, fiber_coordinate,
                                           graph_coordinates, graph_mean_curvature, hole_cutoff,
                                           intrinsic_distance, jacobi_first_eigenpair,
                                           level_set_mean_curvature, mean_curvature_field, omega,
                                           quadratic_form, ricci_normal, signed_distance,
                                           surface_points, unstable_region, verify_calibration)
from app.services.eikonal_service import fast_marching


@pytest.fixture(scope='module')
def neck():
    return neck_metric(Grid((32, 64), (8.0, 2.0)), 0.5)


@pytest.fixture(scope='module')
def waist(neck):
    return Hypersurface(neck.grid, 0, np.zeros(32))


@pytest.fixture(scope='module')
def constants(neck, waist):
    return calibrate(waist, neck)


def test_fiber_coordinate_on_flat_grid():
    g = flat_metric(Grid((16, 32), (1.0, 2.0)))
    s = fiber_coordinate(g, 0)
    h = g.grid.spacing[-1]
    assert s[0, 1] == pytest.approx(h)
    assert s[0, 16] == pytest.approx(1.0)
    assert s[0, 31] == pytest.approx(-h)
    assert omega(g) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        fiber_coordinate(flat_metric(Grid((16,), (1.0,))), 0)


def test_waist_area_and_curvature(neck, waist):
    assert area(waist, neck) == pytest.approx(1.5 * 8.0, rel=1e-12)
    assert np.allclose(graph_mean_curvature(waist, neck), 0.0, atol=1e-8)


def test_surface_must_stay_in_the_tube(neck, waist):
    with pytest.raises(DomainError):
        area(waist.with_heights(np.full(32, 5.0)), neck)


def test_waist_jacobi_eigenvalue_is_the_gauss_curvature(neck, waist):
    a, k = 0.5, math.pi
    gauss = a * k ** 2 / (1 + a) / (1 + a) ** 2
    assert np.allclose(ricci_normal(waist, neck), gauss, rtol=1e-2)
    jd = jacobi_first_eigenpair(waist, neck)
    assert jd.unstable
    assert jd.eigenvalue == pytest.approx(gauss, rel=1e-2)
    assert np.ptp(jd.eta) < 1e-8 * jd.eta.max()
    assert np.sum(jd.eta ** 2 * jd.area_weights) == pytest.approx(1.0)


def test_flat_surface_is_stable():
    g = flat_metric(Grid((16, 32), (1.0, 2.0)))
    S = Hypersurface(g.grid, 0, np.zeros(16))
    jd = jacobi_first_eigenpair(S, g)
    with pytest.raises(CalibrationError):
        unstable_region(S, g, jd)


def test_signed_distance_to_a_flat_graph():
    g = flat_metric(Grid((16, 64), (1.0, 2.0)))
    S = Hypersurface(g.grid, 0, np.full(16, 0.25))
    dist = signed_distance(S, g, band=0.5)
    offset = fiber_coordinate(g, 0) - 0.25
    inside = np.abs(offset) < 0.4
    assert np.allclose(dist.values[inside], offset[inside], atol=1e-12)
    assert eikonal_residual(dist, g) < 1e-10


def test_intrinsic_distance_matches_dijkstra(neck, waist):
    base = neck.grid.base()
    x = base.axis(0)
    S = waist.with_heights(0.2 * np.sin(2 * math.pi * x / 8.0))
    center = (5,)
    marched = intrinsic_distance(S, neck, center)

    h = base.spacing[0]
    y = graph_coordinates(S, neck)
    slope = (np.roll(y, -1) - np.roll(y, 1)) / (2 * h)
    points = np.stack([x, y])
    cost = neck.rho_at(points) * np.sqrt(1.0 + slope ** 2) * h
    n = base.dims[0]
    i = np.arange(n)
    rows = np.concatenate([i, i])
    cols = np.concatenate([(i + 1) % n, (i - 1) % n])
    graph = sparse.csr_matrix((cost[cols], (rows, cols)), shape=(n, n))
    oracle = dijkstra(graph, directed=True, indices=center[0])
    assert np.allclose(marched, oracle, rtol=1e-12, atol=1e-12)


def test_fast_marching_inputs():
    with pytest.raises(InputError):
        fast_marching(np.full((8, 8), np.inf), np.ones((8, 8)), (1.0, 1.0))
    with pytest.raises(InputError):
        fast_marching(np.zeros((8, 8)), -np.ones((8, 8)), (1.0, 1.0))


def test_fast_marching_is_below_the_lattice_path():
    initial = np.full((24, 24), np.inf)
    initial[12, 12] = 0.0
    marched = fast_marching(initial, np.ones((24, 24)), (0.1, 0.1))
    i, j = np.indices((24, 24))
    manhattan = 0.1 * (np.abs(i - 12) + np.abs(j - 12))
    assert np.all(marched <= manhattan + 1e-12)


def test_hole_cutoff_profile(neck, waist):
    distance = intrinsic_distance(waist, neck, (10,))
    chi = hole_cutoff(waist, neck, (10,), 1.0, distance)
    assert np.all(chi[distance <= 1.0] == 1.0)
    assert np.all(chi[distance >= 2.0] == 0.0)


def test_double_cover_splitting_is_orthogonal(neck, waist):
    rng = np.random.default_rng(5)
    for _ in range(20):
        phi = rng.standard_normal((2, 32))
        total, even, odd = double_cover_splitting(waist, neck, phi)
        assert total == pytest.approx(even + odd, rel=1e-12, abs=1e-12)
    with pytest.raises(InputError):
        double_cover_splitting(waist, neck, np.zeros((3, 32)))


def test_calibrated_constants(constants):
    cc = constants
    assert cc.area_M == pytest.approx(12.0, rel=1e-12)
    assert 0 < cc.area_B < cc.area_M
    assert cc.t0 > 0 and cc.tau > 0 and cc.c0 > 0 and cc.z0 > 0
    assert cc.varsigma == min(cc.tau / 2, cc.area_B / 2)
    assert cc.z0 * cc.eta.max() < cc.c0
    assert cc.omega == pytest.approx(1.0)


def test_verify_calibration_reports_checks(neck, constants):
    report = verify_calibration(constants, neck)
    names = [c.name for c in report.checks]
    assert 'surface area' in names
    assert 'closing area bound' in names
    assert report.resolution == [64, 128]
    assert report.passed, [c.name for c in report.checks if not c.passed]


def test_large_eps_fails_the_first_condition(neck, constants):
    verdict = epsilon_admissibility(constants, 0.3, neck)
    assert not verdict.passed
    assert verdict.failed[0].startswith('(i)')


def test_threshold_stays_below_the_closed_form_ceiling(neck, constants):
    cc = constants
    rhs = min(cc.c0 / 20, cc.z0 * cc.eta.min(), 0.5 * (cc.c0 - cc.z0 * cc.eta.max()), cc.omega1)
    ceiling = brentq(lambda e: 12 * Epsilon(e).eps_log - rhs, 1e-12, math.exp(-1) - 1e-9)
    # c0 < omega = 1 here, while eps = 0.02 would need c0 > 240 eps|log eps|
    assert ceiling < 0.02
    assert not epsilon_admissibility(cc, 1.01 * ceiling, neck).passed
    eps_star = admissibility_threshold(cc, neck, lo=1e-8)
    assert eps_star is None or (eps_star <= ceiling
                                and epsilon_admissibility(cc, eps_star, neck).passed)


def test_level_sets_of_a_flat_distance_are_flat():
    g = flat_metric(Grid((16, 64), (1.0, 2.0)))
    S = Hypersurface(g.grid, 0, np.full(16, 0.25))
    dist = signed_distance(S, g, band=0.5)
    sample = level_set_mean_curvature(dist, g, 0.1)
    # the jump across the seam opposite the level also crosses 0.1
    near = np.abs(sample.points[:, 1] - 0.35) < 0.05
    assert near.sum() >= 16
    assert np.allclose(sample.values[near], 0.0, atol=1e-9)
    with pytest.raises(DomainError):
        level_set_mean_curvature(dist, g, 0.5)


def test_signed_distance_to_the_waist_matches_dijkstra(neck, waist):
    dist = signed_distance(waist, neck)
    hx, hy = neck.grid.spacing
    rho = neck.rho
    s1 = fiber_coordinate(neck, 0)[0, 1]
    columns, rows = 32, 32
    node = np.arange(columns * rows).reshape(columns, rows)
    heads, tails, weights = [], [], []
    for c in range(columns):
        for j in range(rows):
            # lattice row j + 1; edges carry the slowness of the node they enter
            if j + 1 < rows:
                heads += [node[c, j], node[c, j + 1]]
                tails += [node[c, j + 1], node[c, j]]
                weights += [rho[c, j + 2] * hy, rho[c, j + 1] * hy]
            for step in (-1, 1):
                heads.append(node[c, j])
                tails.append(node[(c + step) % columns, j])
                weights.append(rho[(c + step) % columns, j + 1] * hx)
    graph = sparse.csr_matrix((weights, (heads, tails)), shape=(node.size, node.size))
    oracle = s1 + dijkstra(graph, directed=True, indices=node[:, 0], min_only=True)
    oracle = oracle.reshape(columns, rows)
    assert np.allclose(dist.values[:, 1:32], oracle[:, :31], rtol=1e-12, atol=1e-12)
    assert np.all(dist.values[:, 0] == 0.0)
    assert np.all(dist.values[:, 33:] < 0.0)


def test_circle_distance_has_curvature_one_over_r():
    g = flat_metric(Grid((128, 128), (1.0, 1.0)))
    x, y = g.grid.mesh()
    r = np.hypot(x - 0.5, y - 0.5)
    dist = SimpleNamespace(values=0.3 - r, band=0.2)
    ring = (r > 0.2) & (r < 0.4)
    for smoothing in (0.0, 1.0):
        H = mean_curvature_field(dist, g, smoothing=smoothing)
        assert np.allclose(H[ring], 1.0 / r[ring], rtol=1e-2)
    sample = level_set_mean_curvature(dist, g, 0.0)
    assert np.allclose(sample.values, 1.0 / 0.3, rtol=1e-2)


def test_tilted_line_area():
    g = flat_metric(Grid((16, 64), (1.0, 2.0)))
    S = Hypersurface(g.grid, 0, np.zeros(16), slope=[0.3])
    assert area(S, g) == pytest.approx(math.sqrt(1.09), rel=1e-12)


def test_area_under_constant_density():
    grid = Grid((16, 64), (1.0, 2.0))
    g = Metric(grid, np.full(grid.shape, 2.0), family='constant',
               density=lambda *x: np.full_like(x[0], 2.0))
    S = Hypersurface(grid, 0, np.full(16, 0.25))
    assert area(S, g) == pytest.approx(2.0, rel=1e-12)
    tilted = Hypersurface(grid, 0, np.full(16, 0.25), slope=[0.3])
    assert area(tilted, g) == pytest.approx(2.0 * math.sqrt(1.09), rel=1e-12)


def test_jacobi_form_is_the_second_variation_of_area(neck, waist):
    x = neck.grid.base().axis(0)
    phi = 1.0 + 0.5 * np.cos(2 * math.pi * x / 8.0)
    t = 1e-3
    second = (area(waist.with_heights(t * phi), neck) - 2 * area(waist, neck)
              + area(waist.with_heights(-t * phi), neck)) / t ** 2
    assert second < 0
    assert quadratic_form(waist, neck, phi) == pytest.approx(second, rel=3e-2)


def test_surface_points_stack_base_and_fibre(neck, waist):
    mesh = neck.grid.base().mesh()
    assert isinstance(mesh, list)
    points = surface_points(waist.with_heights(np.full(32, 0.1)), neck)
    assert points.shape == (2, 32)
    assert np.array_equal(points[0], neck.grid.base().axis(0))
    assert np.all(points[1] > 0)
