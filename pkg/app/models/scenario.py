# app/models/scenario.py
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class Scenario:
    name: str
    dims: list
    lengths: list
    metric_family: str = 'flat'
    metric_params: dict = field(default_factory=dict)
    potential_kind: str = 'standard'
    potential_scale: float = 1.0
    potential_table: Optional[str] = None
    level: float = 0.0
    eps: list = field(default_factory=list)
    seed: int = 7
    admissibility: str = 'strict'
    tolerances: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    minmax: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    output: Optional[str] = None
    source: Optional[str] = None

    def __repr__(self):
        return f'<Scenario {self.name} dims={self.dims} metric={self.metric_family}>'

    def to_dict(self):
        return {
            'name': self.name,
            'dims': list(self.dims),
            'lengths': list(self.lengths),
            'metric': {'family': self.metric_family, **self.metric_params},
            'potential': {'kind': self.potential_kind, 'scale': self.potential_scale,
                          'table': self.potential_table},
            'level': self.level,
            'eps': list(self.eps),
            'seed': self.seed,
            'admissibility': self.admissibility,
            'tolerances': dict(self.tolerances),
            'flow': dict(self.flow),
            'minmax': dict(self.minmax),
            'seeds': list(self.seeds),
        }


@dataclass
class StageRecord:
    name: str
    status: str = 'pending'
    message: str = ''
    outputs: dict = field(default_factory=dict)

    def to_dict(self):
        return {'name': self.name, 'status': self.status, 'message': self.message,
                'outputs': dict(self.outputs)}


@dataclass
class RunReport:
    scenario: Scenario
    version: str
    stages: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def stage(self, name):
        record = StageRecord(name)
        self.stages.append(record)
        return record

    @property
    def failed_checks(self):
        return [c for c in self.checks if not c.passed]

    @property
    def ok(self):
        return all(s.status in ('ok', 'skipped') for s in self.stages)

    def to_dict(self):
        return {
            'version': self.version,
            'scenario': self.scenario.to_dict(),
            'stages': [s.to_dict() for s in self.stages],
            'checks': [c.to_dict() for c in self.checks],
            'artifacts': dict(sorted(self.artifacts.items())),
            'results': self.results,
        }
