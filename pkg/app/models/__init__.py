from app.models.grid import Grid, Metric
from app.models.potential import Potential, Epsilon
from app.models.reports import EnergyReport, SpectralReport, CriticalPoint, BoundCheck, ConditionCheck, Table
from app.models.profile import Profile1D, TruncatedProfile, CollapsingProfile
from app.models.geometry import (Hypersurface, SignedDistanceField, LevelSetSample, JacobiData,
                                 UnstableRegion, CalibratedConstants, AdmissibilityVerdict,
                                 VerificationReport)
from app.models.path import PathSegment, CompositePath, Barrier
from app.models.flow import (FlowConfig, FlowTrace, FlowResult, ComparisonVerdict,
                             DichotomyVerdict, RelaxResult)
from app.models.minmax import Valley, MountainPassResult, LowerBoundVerdict
from app.models.varifold import (DiffuseMass, InterfaceComponent, InterfaceMesh,
                                 MultiplicityCluster, MultiplicityReport)
from app.models.scenario import Scenario, StageRecord, RunReport

__all__ = ['Grid', 'Metric', 'Potential', 'Epsilon', 'EnergyReport', 'SpectralReport',
           'CriticalPoint', 'BoundCheck', 'ConditionCheck', 'Table', 'Profile1D',
           'TruncatedProfile', 'CollapsingProfile', 'Hypersurface', 'SignedDistanceField',
           'LevelSetSample', 'JacobiData', 'UnstableRegion', 'CalibratedConstants',
           'AdmissibilityVerdict', 'VerificationReport', 'PathSegment', 'CompositePath',
           'Barrier', 'FlowConfig', 'FlowTrace', 'FlowResult', 'ComparisonVerdict',
           'DichotomyVerdict', 'RelaxResult', 'Valley', 'MountainPassResult',
           'LowerBoundVerdict', 'DiffuseMass', 'InterfaceComponent', 'InterfaceMesh',
           'MultiplicityCluster', 'MultiplicityReport', 'Scenario', 'StageRecord', 'RunReport']
