# app/models/varifold.py
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiffuseMass:
    total: float
    localized: dict = field(default_factory=dict)

    def to_dict(self):
        return {'total': float(self.total),
                'localized': {k: float(v) for k, v in sorted(self.localized.items())}}


@dataclass
class InterfaceComponent:
    points: np.ndarray
    area: float


@dataclass
class InterfaceMesh:
    dimension: int
    components: list

    @property
    def area(self):
        return float(sum(c.area for c in self.components))

    @property
    def count(self):
        return len(self.components)

    def points(self):
        return np.concatenate([c.points for c in self.components], axis=0)

    def to_dict(self):
        return {'dimension': self.dimension, 'components': self.count, 'area': self.area,
                'component_areas': [float(c.area) for c in self.components]}


@dataclass
class MultiplicityCluster:
    components: int
    area: float
    mass: float

    @property
    def ratio(self):
        return self.mass / self.area

    @property
    def verdict(self):
        return int(round(self.ratio))

    def to_dict(self):
        return {'components': self.components, 'area': float(self.area),
                'mass': float(self.mass), 'ratio': float(self.ratio), 'verdict': self.verdict}


@dataclass
class MultiplicityReport:
    interface: InterfaceMesh
    clusters: list
    mass: float

    @property
    def area(self):
        return float(sum(c.area for c in self.clusters))

    @property
    def ratio(self):
        return float(sum(c.mass for c in self.clusters)) / self.area

    @property
    def verdict(self):
        return int(round(self.ratio))

    @property
    def margin(self):
        return abs(self.ratio - round(self.ratio))

    def to_dict(self):
        return {'area': self.area, 'mass': float(self.mass), 'ratio': self.ratio,
                'verdict': self.verdict, 'margin': self.margin,
                'interface': self.interface.to_dict(),
                'clusters': [c.to_dict() for c in self.clusters]}
