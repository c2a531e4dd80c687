# app/models/grid.py
from functools import cached_property

import numpy as np
from scipy import ndimage

from app.exceptions import DomainError


class Grid:
    """
    Periodic rectangular lattice standing in for the ambient manifold.

    The last axis is the fibre axis x_d: hypersurfaces are graphs over the
    remaining (base) axes.
    """

    def __init__(self, dims, lengths):
        dims = tuple(int(n) for n in dims)
        lengths = tuple(float(length) for length in lengths)
        if len(dims) != len(lengths) or not 1 <= len(dims) <= 3:
            raise DomainError("Grid needs 1 to 3 axes with one length per axis",
                              dims=list(dims), lengths=list(lengths))
        if any(n < 8 for n in dims):
            raise DomainError("Every axis needs at least 8 nodes", dims=list(dims))
        if any(not np.isfinite(length) or length <= 0 for length in lengths):
            raise DomainError("Periods must be positive", lengths=list(lengths))
        self.dims = dims
        self.lengths = lengths

    @property
    def d(self):
        return len(self.dims)

    @property
    def shape(self):
        return self.dims

    @property
    def size(self):
        return int(np.prod(self.dims))

    @property
    def spacing(self):
        return tuple(length / n for length, n in zip(self.lengths, self.dims))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def axis(self, k):
        return np.arange(self.dims[k]) * self.spacing[k]

    def mesh(self):
        """Node coordinates per axis, as a list of arrays."""
        return list(np.meshgrid(*(self.axis(k) for k in range(self.d)), indexing='ij'))

    def base(self):
        """Grid of the base axes (all but the fibre axis)."""
        if self.d < 2:
            raise DomainError("A one-dimensional grid has no base")
        return Grid(self.dims[:-1], self.lengths[:-1])

    def refined(self, factor=2):
        return Grid([n * factor for n in self.dims], self.lengths)

    def same_as(self, other):
        return self.dims == other.dims and np.allclose(self.lengths, other.lengths, rtol=0, atol=0)

    def __repr__(self):
        return f'<Grid dims={list(self.dims)} lengths={list(self.lengths)}>'

    def to_dict(self):
        return {'dims': list(self.dims), 'lengths': list(self.lengths), 'spacing': list(self.spacing)}


class Metric:
    """
    Conformal metric rho^2 * flat on a Grid.

    `density` is an optional callable taking per-axis coordinate arrays and
    returning rho; analytic families set it so off-grid samples are exact.
    """

    def __init__(self, grid, rho, family='custom', params=None, density=None):
        rho = np.asarray(rho, dtype=float)
        if rho.shape != grid.shape:
            raise DomainError("Metric weight does not match the grid",
                              expected=list(grid.shape), got=list(rho.shape))
        if not np.all(np.isfinite(rho)) or rho.min() <= 0:
            raise DomainError("Metric weight must be finite and positive")
        self.grid = grid
        self.rho = rho
        self.family = family
        self.params = dict(params or {})
        self.density = density

    @cached_property
    def volume(self):
        """Volume element rho^d per node."""
        return self.rho ** self.grid.d

    @cached_property
    def inverse_factor(self):
        return self.rho ** -2

    @property
    def rho_min(self):
        return float(self.rho.min())

    @property
    def rho_max(self):
        return float(self.rho.max())

    @property
    def is_flat(self):
        return bool(np.all(self.rho == 1.0))

    @cached_property
    def log_derivatives(self):
        """Central-difference gradient and Hessian of log rho on the nodes."""
        f = np.log(self.rho)
        h = self.grid.spacing
        d = self.grid.d
        grad = np.empty((d,) + f.shape)
        hess = np.empty((d, d) + f.shape)
        for a in range(d):
            grad[a] = (np.roll(f, -1, a) - np.roll(f, 1, a)) / (2 * h[a])
        for a in range(d):
            for b in range(d):
                if a == b:
                    hess[a, a] = (np.roll(f, -1, a) - 2 * f + np.roll(f, 1, a)) / h[a] ** 2
                else:
                    hess[a, b] = (np.roll(grad[a], -1, b) - np.roll(grad[a], 1, b)) / (2 * h[b])
        return grad, hess

    def sample(self, values, points):
        """Periodic cubic interpolation of a node Field at coordinate points (d, ...)."""
        points = np.asarray(points, dtype=float)
        index = np.stack([points[k] / self.grid.spacing[k] for k in range(self.grid.d)])
        flat = index.reshape(self.grid.d, -1)
        out = ndimage.map_coordinates(values, flat, order=3, mode='grid-wrap')
        return out.reshape(points.shape[1:])

    def rho_at(self, points):
        points = np.asarray(points, dtype=float)
        if self.density is not None:
            return np.asarray(self.density(*points), dtype=float) * np.ones(points.shape[1:])
        return self.sample(self.rho, points)

    def __repr__(self):
        return f'<Metric {self.family} {self.params} on {self.grid!r}>'

    def to_dict(self):
        return {
            'family': self.family,
            'params': self.params,
            'rho_min': self.rho_min,
            'rho_max': self.rho_max,
            'grid': self.grid.to_dict(),
        }
