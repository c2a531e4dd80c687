# app/models/reports.py
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class EnergyReport:
    gradient: float
    potential: float
    sigma: float

    @property
    def total(self):
        return self.gradient + self.potential

    @property
    def equipartition_defect(self):
        return self.gradient - self.potential

    def __repr__(self):
        return f'<EnergyReport total={self.total:.6g}>'

    def to_dict(self):
        return {
            'total': float(self.total),
            'gradient': float(self.gradient),
            'potential': float(self.potential),
            'equipartition_defect': float(self.equipartition_defect),
            'sigma': float(self.sigma),
        }


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    eigenfields: Optional[np.ndarray]
    tol_eig: float

    @property
    def index(self):
        return int(np.sum(self.eigenvalues < -self.tol_eig))

    @property
    def nullity(self):
        return int(np.sum(np.abs(self.eigenvalues) <= self.tol_eig))

    @property
    def lowest(self):
        return float(self.eigenvalues[0])

    @property
    def strictly_stable(self):
        return bool(self.eigenvalues[0] > self.tol_eig)

    @property
    def stable(self):
        return bool(self.eigenvalues[0] >= -self.tol_eig)

    def __repr__(self):
        return f'<SpectralReport lambda1={self.lowest:.6g} index={self.index}>'

    def to_dict(self):
        return {
            'eigenvalues': [float(v) for v in self.eigenvalues],
            'index': self.index,
            'nullity': self.nullity,
            'strictly_stable': self.strictly_stable,
            'tol_eig': float(self.tol_eig),
        }


@dataclass
class CriticalPoint:
    field: np.ndarray
    energy: EnergyReport
    residual: float
    spectrum: Optional[SpectralReport] = None
    provenance: str = ''

    @property
    def verdict(self):
        if self.spectrum is None:
            return 'unclassified'
        if self.spectrum.strictly_stable:
            return 'strictly stable'
        if self.spectrum.stable:
            return 'stable'
        return f'index {self.spectrum.index}'

    def __repr__(self):
        return f'<CriticalPoint E={self.energy.total:.6g} {self.verdict}>'

    def to_dict(self):
        return {
            'energy': self.energy.to_dict(),
            'residual': float(self.residual),
            'spectrum': self.spectrum.to_dict() if self.spectrum else None,
            'verdict': self.verdict,
            'provenance': self.provenance,
        }


@dataclass
class BoundCheck:
    """One asserted inequality `value <= bound + slack` (strict when slack is None)."""
    name: str
    value: float
    bound: float
    slack: Optional[float] = 0.0
    note: str = ''

    @property
    def margin(self):
        return self.bound - self.value

    @property
    def passed(self):
        if self.slack is None:
            return bool(self.value < self.bound)
        return bool(self.value <= self.bound + self.slack)

    def __repr__(self):
        return f'<BoundCheck {self.name} {"ok" if self.passed else "FAILED"} margin={self.margin:.3g}>'

    def to_dict(self):
        return {
            'name': self.name,
            'value': float(self.value),
            'bound': float(self.bound),
            'slack': None if self.slack is None else float(self.slack),
            'margin': float(self.margin),
            'passed': self.passed,
            'note': self.note,
        }


@dataclass
class ConditionCheck:
    """Strict inequality `lhs < rhs` with its margin."""
    name: str
    lhs: float
    rhs: float
    note: str = ''
    evaluated: bool = True

    @property
    def passed(self):
        return bool(self.evaluated and self.lhs < self.rhs)

    @property
    def margin(self):
        return self.rhs - self.lhs

    def to_dict(self):
        return {'name': self.name, 'lhs': float(self.lhs), 'rhs': float(self.rhs),
                'margin': float(self.margin), 'passed': self.passed,
                'evaluated': self.evaluated, 'note': self.note}


@dataclass
class Table:
    """Column-named rows for CSV emission."""
    columns: list
    rows: list = field(default_factory=list)

    def append(self, *values):
        self.rows.append(list(values))

    def column(self, name):
        k = self.columns.index(name)
        return [row[k] for row in self.rows]

    def to_dict(self):
        return {'columns': list(self.columns), 'rows': [list(r) for r in self.rows]}
