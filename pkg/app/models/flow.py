# app/models/flow.py
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from app.exceptions import InputError


@dataclass
class FlowConfig:
    dt: float
    max_steps: int = 20000
    tol_res: float = 1e-7
    monitor_every: int = 25
    mu: float = 0.0
    snapshot_every: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise InputError("Flow time step must be positive")
        if self.tol_res <= 0:
            raise InputError("Residual tolerance must be positive")
        if self.mu < 0:
            raise InputError("mu must be nonnegative")
        if self.max_steps < 0 or self.monitor_every < 1:
            raise InputError("max_steps >= 0 and monitor_every >= 1 required")

    @classmethod
    def for_eps(cls, eps, dt_fraction=0.125, tol_res_scale=1e-8, **kwargs):
        """Default step eps^2/8 and residual tolerance scaled by 1/eps."""
        e = float(eps)
        return cls(dt=dt_fraction * e * e, tol_res=tol_res_scale / e, **kwargs)

    def replace(self, **changes):
        values = dict(self.__dict__)
        values.update(changes)
        return FlowConfig(**values)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class FlowTrace:
    times: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    functional: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    min_negative_gradient: list = field(default_factory=list)
    u_min: list = field(default_factory=list)
    u_max: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    dt: float = 0.0
    dt_halvings: int = 0

    def record(self, step, time, energy, functional, residual, min_neg, u):
        self.steps.append(int(step))
        self.times.append(float(time))
        self.energy.append(float(energy))
        self.functional.append(float(functional))
        self.residual.append(float(residual))
        self.min_negative_gradient.append(float(min_neg))
        self.u_min.append(float(u.min()))
        self.u_max.append(float(u.max()))

    def rows(self):
        return [
            [self.steps[k], self.times[k], self.energy[k], self.functional[k], self.residual[k],
             self.min_negative_gradient[k], self.u_min[k], self.u_max[k]]
            for k in range(len(self.times))
        ]

    COLUMNS = ['step', 'time', 'energy', 'functional', 'residual',
               'min_negative_gradient', 'u_min', 'u_max']

    def to_dict(self):
        return {'samples': len(self.times), 'dt': self.dt, 'dt_halvings': self.dt_halvings,
                'notes': list(self.notes),
                'final_energy': self.energy[-1] if self.energy else None,
                'final_residual': self.residual[-1] if self.residual else None}


@dataclass
class FlowResult:
    limit: np.ndarray
    trace: FlowTrace
    verdict: str
    spectrum: Optional[object] = None

    @property
    def converged(self):
        return self.verdict == 'converged'

    def to_dict(self):
        return {'verdict': self.verdict, 'trace': self.trace.to_dict(),
                'spectrum': self.spectrum.to_dict() if self.spectrum else None}


@dataclass
class ComparisonVerdict:
    holds: bool
    samples: int
    min_gap: float
    first_violation: Optional[float] = None

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class DichotomyVerdict:
    case: str
    spread: float
    witness_min: Optional[float] = None
    witness_width: Optional[float] = None

    @property
    def witness_ok(self):
        if self.witness_min is None:
            return None
        return bool(self.witness_min > 0.5)

    def to_dict(self):
        return {'case': self.case, 'spread': float(self.spread),
                'witness_min': self.witness_min, 'witness_width': self.witness_width,
                'witness_ok': self.witness_ok}


@dataclass
class RelaxResult:
    critical_point: object
    first_stage: FlowResult
    barrier_stage: FlowResult
    second_stage: FlowResult
    mu: float
    dichotomy: DichotomyVerdict
    comparison: ComparisonVerdict
    checks: list
    witness_fill_time: Optional[float] = None
    anomaly: Optional[str] = None

    def to_dict(self):
        return {
            'mu': float(self.mu),
            'critical_point': self.critical_point.to_dict(),
            'first_stage': self.first_stage.to_dict(),
            'barrier_stage': self.barrier_stage.to_dict(),
            'second_stage': self.second_stage.to_dict(),
            'dichotomy': self.dichotomy.to_dict(),
            'comparison': self.comparison.to_dict(),
            'checks': [c.to_dict() for c in self.checks],
            'witness_fill_time': self.witness_fill_time,
            'anomaly': self.anomaly,
        }
