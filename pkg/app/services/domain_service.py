# app/services/domain_service.py
"""
Discrete operators on a periodic grid with a conformal metric rho^2 * flat.

The Laplace-Beltrami operator is assembled in flux form on the staggered
lattice, Delta_g u = rho^-d div(a grad u) with a = rho^(d-2) averaged at half
nodes, so that summation by parts against `dirichlet_pairing` is exact.
"""
import logging
import math

import numpy as np
from scipy import sparse

from app.exceptions import DomainError, InputError
from app.models import Metric

logger = logging.getLogger(__name__)


def _check(u, g):
    u = np.asarray(u, dtype=float)
    if u.shape != g.grid.shape:
        raise DomainError("Field does not match the grid",
                          expected=list(g.grid.shape), got=list(u.shape))
    return u


def require_finite(u, name='field'):
    if not np.all(np.isfinite(u)):
        raise InputError(f"{name} contains non-finite values")
    return u


def half_node_weights(g):
    """a = rho^(d-2) averaged onto the edge between node i and i+1, per axis."""
    a = g.rho ** (g.grid.d - 2)
    return [0.5 * (a + np.roll(a, -1, axis)) for axis in range(g.grid.d)]


def forward_differences(u, g):
    return [(np.roll(u, -1, axis) - u) / h for axis, h in enumerate(g.grid.spacing)]


def gradient_field(u, g):
    """Central-difference gradient, each component scaled by 1/rho."""
    u = _check(u, g)
    parts = [
        (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2 * h)
        for axis, h in enumerate(g.grid.spacing)
    ]
    return np.stack(parts) / g.rho


def laplace_beltrami(u, g):
    u = _check(u, g)
    out = np.zeros_like(u)
    for axis, (a, h) in enumerate(zip(half_node_weights(g), g.grid.spacing)):
        flux = a * (np.roll(u, -1, axis) - u) / (h * h)
        out += flux - np.roll(flux, 1, axis)
    return out / g.volume


def integrate(f, g):
    f = _check(f, g)
    return float(np.sum(f * g.volume) * g.grid.cell_volume)


def volume(g):
    return float(np.sum(g.volume) * g.grid.cell_volume)


def dirichlet_pairing(u, v, g):
    """Integral of <grad u, grad v>_g over the staggered edges."""
    u = _check(u, g)
    v = _check(v, g)
    total = 0.0
    for a, du, dv in zip(half_node_weights(g), forward_differences(u, g), forward_differences(v, g)):
        total += float(np.sum(a * du * dv))
    return total * g.grid.cell_volume


def l2_norm(u, g):
    return math.sqrt(max(integrate(u * u, g), 0.0))


def l2_distance(u, v, g):
    return l2_norm(np.asarray(u) - np.asarray(v), g)


def node_gradient_energy(u, g):
    """
    Per-node share of the metric Dirichlet density.

    Each edge term is split evenly between its two endpoints and divided by the
    volume element, so integrate() of the result equals dirichlet_pairing(u, u).
    """
    u = _check(u, g)
    density = np.zeros_like(u)
    for a, du, axis in zip(half_node_weights(g), forward_differences(u, g), range(g.grid.d)):
        edge = a * du * du
        density += 0.5 * (edge + np.roll(edge, 1, axis))
    return density / g.volume


# -- sparse assembly ----------------------------------------------------------

def _shift_matrix(grid, axis):
    index = np.arange(grid.size).reshape(grid.shape)
    target = np.roll(index, -1, axis).ravel()
    return sparse.csr_matrix((np.ones(grid.size), (index.ravel(), target)),
                             shape=(grid.size, grid.size))


def central_difference_matrix(grid, axis):
    """Periodic central difference along `axis`; antisymmetric."""
    shift = _shift_matrix(grid, axis)
    return (shift - shift.T) / (2 * grid.spacing[axis])


def difference_matrix(grid, axis):
    """Periodic forward difference along `axis` acting on row-major flattened Fields."""
    identity = sparse.identity(grid.size, format='csr')
    return (_shift_matrix(grid, axis) - identity) / grid.spacing[axis]


def stiffness_matrix(g):
    """
    Symmetric K with (K u) = volume-weighted Laplace-Beltrami, i.e. K = V Delta_g.

    K is negative semidefinite and its off-diagonal entries are nonnegative.
    """
    grid = g.grid
    K = sparse.csr_matrix((grid.size, grid.size))
    for axis, a in enumerate(half_node_weights(g)):
        D = difference_matrix(grid, axis)
        K = K - D.T @ sparse.diags(a.ravel()) @ D
    return (K * grid.cell_volume).tocsc()


def mass_matrix(g):
    return sparse.diags((g.volume * g.grid.cell_volume).ravel()).tocsc()


# -- metric families ----------------------------------------------------------

def flat_metric(grid):
    return Metric(grid, np.ones(grid.shape), family='flat',
                  density=lambda *x: np.ones_like(x[0]))


def neck_metric(grid, amplitude, wavelength=None):
    """rho = 1 + a cos(2 pi x_d / wavelength); the level x_d = 0 is the widest waist circle."""
    period = grid.lengths[-1]
    wavelength = period if wavelength is None else float(wavelength)
    if not 0 <= abs(amplitude) < 1:
        raise DomainError("Neck amplitude must satisfy |a| < 1", amplitude=amplitude)
    ratio = period / wavelength
    if wavelength <= 0 or abs(ratio - round(ratio)) > 1e-9:
        raise DomainError("Neck wavelength must divide the fibre period",
                          wavelength=wavelength, period=period)
    k = 2 * math.pi / wavelength

    def density(*x):
        return 1.0 + amplitude * np.cos(k * x[-1])

    rho = density(*grid.mesh())
    return Metric(grid, rho, family='neck',
                  params={'amplitude': float(amplitude), 'wavelength': wavelength},
                  density=density)


def table_metric(grid, path):
    """rho read from a CSV file of node values in row-major order."""
    try:
        values = np.loadtxt(path, delimiter=',', ndmin=1).ravel()
    except OSError as exc:
        raise InputError(f"Cannot read metric table {path}: {exc}")
    if values.size != grid.size:
        raise DomainError("Metric table size does not match the grid",
                          expected=grid.size, got=int(values.size))
    return Metric(grid, values.reshape(grid.shape), family='table', params={'table': str(path)})


def build_metric(grid, family, **params):
    if family == 'flat':
        return flat_metric(grid)
    if family == 'neck':
        return neck_metric(grid, params.get('amplitude', 0.5), params.get('wavelength'))
    if family == 'table':
        return table_metric(grid, params['table'])
    raise InputError(f"Unknown metric family '{family}'")


def refine_metric(g, factor=2):
    """The same metric on a grid with `factor` times the nodes per axis."""
    fine = g.grid.refined(factor)
    if g.density is not None:
        rho = g.density(*fine.mesh()) * np.ones(fine.shape)
        return Metric(fine, rho, family=g.family, params=g.params, density=g.density)
    rho = g.sample(g.rho, np.stack(fine.mesh()))
    return Metric(fine, rho, family=g.family, params=g.params)
