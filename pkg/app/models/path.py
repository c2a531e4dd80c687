# app/models/path.py
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.models.reports import BoundCheck


@dataclass
class PathSegment:
    label: str
    params: list
    fields: list
    energies: list
    bound: Optional[float] = None
    anchor: str = ''
    slack: float = 0.0
    checks: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def energy_values(self):
        return np.array([e.total for e in self.energies])

    @property
    def max_energy(self):
        return float(self.energy_values.max())

    @property
    def first(self):
        return self.fields[0]

    @property
    def last(self):
        return self.fields[-1]

    def bound_check(self):
        if self.bound is None:
            return None
        return BoundCheck(self.anchor or self.label, self.max_energy, self.bound, self.slack)

    def __len__(self):
        return len(self.fields)

    def __repr__(self):
        return f'<PathSegment {self.label} samples={len(self)} max={self.max_energy:.6g}>'

    def to_dict(self):
        check = self.bound_check()
        return {
            'label': self.label,
            'samples': len(self),
            'param_start': float(self.params[0]),
            'param_end': float(self.params[-1]),
            'max_energy': self.max_energy,
            'bound': None if check is None else check.to_dict(),
            'checks': [c.to_dict() for c in self.checks],
            'diagnostics': dict(sorted(self.diagnostics.items())),
        }


@dataclass
class CompositePath:
    segments: list
    target: float
    varsigma: float

    @property
    def global_max(self):
        return max(s.max_energy for s in self.segments)

    @property
    def final(self):
        return self.segments[-1].last

    @property
    def achieved_varsigma(self):
        return self.target + self.varsigma - self.global_max

    def composite_check(self):
        # strict inequality, no slack
        return BoundCheck('composite path bound', self.global_max, self.target, slack=None)

    def to_dict(self):
        return {
            'segments': [s.to_dict() for s in self.segments],
            'global_max': self.global_max,
            'target': self.target,
            'varsigma_required': self.varsigma,
            'varsigma_achieved': self.achieved_varsigma,
            'composite': self.composite_check().to_dict(),
        }


@dataclass
class Barrier:
    field: np.ndarray
    mu: float
    residual_sup: float
    positivity_min: float

    def to_dict(self):
        return {'mu': float(self.mu), 'residual_sup': float(self.residual_sup),
                'positivity_min': float(self.positivity_min)}
