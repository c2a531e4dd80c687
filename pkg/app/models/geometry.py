# app/models/geometry.py
from dataclasses import dataclass, field

import numpy as np

from app.exceptions import DomainError


class Hypersurface:
    """
    Graph over the base axes, seen from the level row `level` of the fibre axis.

    `heights` are fibre arclengths (metric length along x_d) measured from the
    level, on the side given by `sheet` (+1 upwards, -1 downwards). `slope`
    adds a linear drift in coordinate units, for non-periodic test graphs.
    """

    def __init__(self, grid, level, heights, sheet=1, slope=None):
        if grid.d < 2:
            raise DomainError("Hypersurfaces need an ambient grid with at least two axes")
        base_shape = grid.shape[:-1]
        heights = np.broadcast_to(np.asarray(heights, dtype=float), base_shape).copy()
        if not np.all(np.isfinite(heights)):
            raise DomainError("Hypersurface heights must be finite")
        if sheet not in (1, -1):
            raise DomainError("sheet must be +1 or -1")
        self.grid = grid
        self.level = int(level) % grid.dims[-1]
        self.heights = heights
        self.sheet = sheet
        self.slope = np.zeros(grid.d - 1) if slope is None else np.asarray(slope, dtype=float)

    @property
    def n(self):
        return self.grid.d - 1

    @property
    def base(self):
        return self.grid.base()

    @property
    def level_coordinate(self):
        return self.level * self.grid.spacing[-1]

    def with_heights(self, heights, sheet=None):
        return Hypersurface(self.grid, self.level, heights,
                            self.sheet if sheet is None else sheet, self.slope)

    def mirrored(self):
        return self.with_heights(self.heights, -self.sheet)

    def __repr__(self):
        return (f'<Hypersurface n={self.n} level={self.level} sheet={self.sheet:+d} '
                f'max|h|={np.abs(self.heights).max():.4g}>')

    def to_dict(self):
        return {'n': self.n, 'level': self.level, 'sheet': self.sheet,
                'height_min': float(self.heights.min()), 'height_max': float(self.heights.max())}


@dataclass
class SignedDistanceField:
    values: np.ndarray
    surface: Hypersurface
    band: float

    def __repr__(self):
        return f'<SignedDistanceField band={self.band:.4g}>'


@dataclass
class LevelSetSample:
    level: float
    points: np.ndarray
    values: np.ndarray

    @property
    def minimum(self):
        return float(self.values.min())


@dataclass
class JacobiData:
    q: np.ndarray
    eigenvalue: float
    eta: np.ndarray
    area_weights: np.ndarray

    @property
    def unstable(self):
        return self.eigenvalue > 0

    def to_dict(self):
        return {'lambda': float(self.eigenvalue), 'q_min': float(self.q.min()),
                'q_max': float(self.q.max()), 'eta_min': float(self.eta.min()),
                'eta_max': float(self.eta.max())}


@dataclass
class UnstableRegion:
    center: tuple
    radius: float
    outer_radius: float
    phi_tilde: np.ndarray
    quadratic_form: float
    distance: np.ndarray
    attempts: int

    @property
    def ball(self):
        return self.distance <= self.radius

    def to_dict(self):
        return {'center': [int(c) for c in self.center], 'R': float(self.radius),
                'R0': float(self.outer_radius), 'Q_phi_tilde': float(self.quadratic_form),
                'attempts': self.attempts}


@dataclass
class CalibratedConstants:
    surface: Hypersurface
    jacobi: JacobiData
    region: UnstableRegion
    hole_cutoff: np.ndarray
    area_M: float
    area_B: float
    t0: float
    c0: float
    tau: float
    z0: float
    K_A: float
    omega: float
    omega1: float
    t_samples: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t_areas: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def phi_tilde(self):
        return self.region.phi_tilde

    @property
    def eta(self):
        return self.jacobi.eta

    @property
    def lam(self):
        return self.jacobi.eigenvalue

    @property
    def varsigma(self):
        return min(self.tau / 2.0, self.area_B / 2.0)

    def to_dict(self):
        return {
            'area_M': float(self.area_M), 'area_B': float(self.area_B),
            't0': float(self.t0), 'c0': float(self.c0), 'tau': float(self.tau),
            'z0': float(self.z0), 'K_A': float(self.K_A), 'omega': float(self.omega),
            'omega1': float(self.omega1), 'varsigma': float(self.varsigma),
            'lambda': float(self.lam), 'eta_min': float(self.eta.min()),
            'eta_max': float(self.eta.max()), 'region': self.region.to_dict(),
            'surface': self.surface.to_dict(),
        }


@dataclass
class AdmissibilityVerdict:
    eps: float
    conditions: list

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    @property
    def failed(self):
        return [c.name for c in self.conditions if not c.passed]

    def condition(self, name):
        return next(c for c in self.conditions if c.name == name)

    def to_dict(self):
        return {'eps': self.eps, 'passed': self.passed, 'failed': self.failed,
                'conditions': [c.to_dict() for c in self.conditions]}


@dataclass
class VerificationReport:
    checks: list
    resolution: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {'passed': self.passed, 'resolution': self.resolution,
                'checks': [c.to_dict() for c in self.checks]}
