# app/models/minmax.py
from dataclasses import dataclass
from typing import Optional


@dataclass
class Valley:
    critical_point: object
    provenance: str

    @property
    def field(self):
        return self.critical_point.field

    @property
    def energy(self):
        return self.critical_point.energy.total

    def __repr__(self):
        return f'<Valley {self.provenance} E={self.energy:.6g}>'

    def to_dict(self):
        return {'provenance': self.provenance, 'energy': float(self.energy),
                'critical_point': self.critical_point.to_dict()}


@dataclass
class MountainPassResult:
    pair: tuple
    value: float
    saddle: object
    path: list
    path_energies: list
    iterations: int
    converged: bool

    @property
    def gap(self):
        return self.value - max(v.energy for v in self.pair)

    @property
    def index(self):
        return self.saddle.spectrum.index if self.saddle.spectrum else None

    def __repr__(self):
        return f'<MountainPassResult value={self.value:.6g} index={self.index}>'

    def to_dict(self):
        return {
            'pair': [v.provenance for v in self.pair],
            'value': float(self.value),
            'gap': float(self.gap),
            'index': self.index,
            'iterations': self.iterations,
            'converged': self.converged,
            'saddle': self.saddle.to_dict(),
            'path_energies': [float(e) for e in self.path_energies],
        }


@dataclass
class LowerBoundVerdict:
    kind: str
    energy: float
    floor: Optional[float] = None

    @property
    def passed(self):
        if self.kind == 'constant' or self.floor is None:
            return True
        return self.energy >= self.floor

    def to_dict(self):
        return {'kind': self.kind, 'energy': float(self.energy),
                'floor': self.floor, 'passed': self.passed}
