# app/services/sweep_service.py
"""
End-to-end runs: the full pipeline on one scenario and eps, and the
continuation sweep over a list of eps.

Stages share one calibration. Each stage reads and extends a state dict and
returns its bound checks; a stage failure stops the pipeline but only flags
the row in a sweep.
"""
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from app.exceptions import DomainError, InputError, LabError
from app.models import BoundCheck, Epsilon, FlowConfig, RunReport, Table
from app.services.flow_service import two_stage_relax
from app.services.geometry_service import (admissibility_threshold, barrier_curvature, calibrate,
                                           epsilon_admissibility, verify_calibration)
from app.services.minmax_service import (energy_floor, harvest_valleys, lower_bound_check,
                                         optimize_valley_pairs)
from app.services.path_service import (build_barrier, build_path, empirical_thresholds,
                                       hole_transition_energy, profile_energy)
from app.services.scenario_service import build_metric_for, build_potential, build_surface
from app.services.storage_service import (create_output_dir, read_field, write_field, write_json,
                                          write_table)
from app.services.varifold_service import diffuse_mass, multiplicity

logger = logging.getLogger(__name__)

MASS_ENERGY_TOL = 0.02
CAUCHY_TOL = 0.02


@dataclass
class Lab:
    """A scenario with its metric, potential and calibration built once."""
    scenario: object
    g: object
    p: object
    cc: object = None
    curvature: object = None
    eps_star: object = None
    settings: dict = field(default_factory=dict)

    def option(self, section, key, setting, default):
        values = getattr(self.scenario, section)
        if key in values:
            return values[key]
        return self.settings.get(setting, default)

    def flow_config(self, eps):
        return FlowConfig.for_eps(
            eps,
            dt_fraction=self.option('flow', 'dt_fraction', 'DT_FRACTION', 0.125),
            tol_res_scale=self.option('tolerances', 'tol_res_scale', 'TOL_RES_SCALE', 1e-8),
            max_steps=int(self.option('flow', 'max_steps', 'MAX_FLOW_STEPS', 20000)),
            monitor_every=int(self.option('flow', 'monitor_every', 'MONITOR_EVERY', 25)),
        )

    @property
    def tol_scale(self):
        return self.option('tolerances', 'tol_eig_scale', 'TOL_EIG_SCALE', 1e-6)

    @property
    def err_constant(self):
        return self.option('tolerances', 'err_constant', 'ERR_CONSTANT', 1.0)


def prepare(scenario, settings=None):
    g = build_metric_for(scenario)
    p = build_potential(scenario)
    return Lab(scenario=scenario, g=g, p=p, settings=dict(settings or {}))


def _artifact(state, name):
    out = state.get('out')
    return None if out is None else os.path.join(out, name)


# -- stages -------------------------------------------------------------------

def stage_calibrate(lab, state):
    S = build_surface(lab.scenario, lab.g)
    lab.cc = calibrate(S, lab.g)
    lab.curvature = barrier_curvature(lab.cc, lab.g)
    verification = verify_calibration(lab.cc, lab.g)
    lab.eps_star = admissibility_threshold(lab.cc, lab.g)
    outputs = {'constants': lab.cc.to_dict(), 'verification': verification.to_dict(),
               'eps_star': lab.eps_star}
    path = _artifact(state, 'calibration.json')
    if path:
        write_json(path, outputs)
        state['artifacts']['calibration'] = os.path.basename(path)
    return outputs, list(verification.checks)


def stage_admissible(lab, state):
    eps = state['eps']
    verdict = epsilon_admissibility(lab.cc, eps, lab.g, lab.curvature)
    state['admissibility'] = verdict
    if not verdict.passed and lab.scenario.admissibility == 'strict':
        raise DomainError(f"eps={eps.value} is not admissible", failed=verdict.failed)
    if not verdict.passed:
        logger.warning("eps=%.4g inadmissible (%s); continuing in report mode",
                       eps.value, ', '.join(verdict.failed))
    return verdict.to_dict(), []


def stage_path(lab, state):
    eps = state['eps']
    composer, composite, _ = build_path(
        lab.cc, eps, lab.g, lab.p, mode='report',
        max_samples=int(lab.settings.get('PATH_MAX_SAMPLES', 48)), err_constant=lab.err_constant,
        curvature=lab.curvature)
    state['composer'] = composer
    state['path'] = composite
    checks = []
    for segment in composite.segments:
        checks.append(segment.bound_check())
        checks.extend(segment.checks)
        path = _artifact(state, f'path_{segment.label}.csv')
        if path:
            write_table(path, profile_energy(segment))
            state['artifacts'][f'path_{segment.label}'] = os.path.basename(path)
    checks.append(composite.composite_check())
    hte = hole_transition_energy(composite.segments[0].last, lab.cc, lab.g, eps, lab.p)
    state['hole_transition_energy'] = hte
    outputs = composite.to_dict()
    outputs['hole_transition_energy'] = hte
    return outputs, checks


def stage_barrier(lab, state):
    mu = lab.scenario.flow.get('mu')
    barrier = build_barrier(state['composer'], h=state['path'].final, mu=mu)
    state['barrier'] = barrier
    return barrier.to_dict(), [BoundCheck('barrier positivity', -barrier.positivity_min, 0.0, None)]


def stage_relax(lab, state):
    eps = state['eps']
    result = two_stage_relax(state['path'].final, state['barrier'].field, lab.cc, eps, lab.g, lab.p,
                             cfg=lab.flow_config(eps.value), mu=state['barrier'].mu,
                             seed=lab.scenario.seed, err_constant=lab.err_constant,
                             tol_scale=lab.tol_scale)
    state['relax'] = result
    path = _artifact(state, 'relaxed.field')
    if path:
        write_field(path, result.critical_point.field, lab.g.grid, eps.value)
        state['artifacts']['relaxed'] = os.path.basename(path)
    return result.to_dict(), list(result.checks)


def stage_minmax(lab, state):
    eps = state['eps']
    seeds, labels = [], []
    if state.get('relax') is not None:
        seeds.append(state['relax'].critical_point.field)
        labels.append('relaxed path endpoint')
    for seed_file in lab.scenario.seeds:
        u, grid, _ = read_field(seed_file)
        if not grid.same_as(lab.g.grid):
            logger.warning("seed %s is on another grid; skipped", seed_file)
            continue
        seeds.append(u)
        labels.append(os.path.basename(seed_file))
    cfg = lab.flow_config(eps.value)
    valleys = harvest_valleys(seeds, eps, lab.g, lab.p, cfg=cfg,
                              dedup_tol=lab.option('minmax', 'dedup_tol', 'DEDUP_TOL', 1e-3),
                              seed=lab.scenario.seed, tol_scale=lab.tol_scale, provenances=labels)
    saddle, table, results = optimize_valley_pairs(
        valleys, eps, lab.g, lab.p, threads=state.get('threads', 1),
        nodes=int(lab.option('minmax', 'nodes', 'STRING_NODES', 33)),
        max_iter=int(lab.option('minmax', 'max_iter', 'STRING_MAX_ITER', 4000)),
        perturbation=lab.option('minmax', 'perturbation', 'STRING_PERTURBATION', 0.05),
        seed=lab.scenario.seed, cfg=cfg, tol_scale=lab.tol_scale)
    state['saddle'] = saddle
    state['minmax_value'] = saddle.energy.total
    path = _artifact(state, 'minmax_pairs.csv')
    if path:
        write_table(path, table)
        write_field(_artifact(state, 'saddle.field'), saddle.field, lab.g.grid, eps.value)
        state['artifacts']['minmax_pairs'] = os.path.basename(path)
        state['artifacts']['saddle'] = 'saddle.field'
    checks = []
    if state.get('path') is not None:
        # the explicit path is a competitor, so the winner sits below its bound
        checks.append(BoundCheck('minmax below path bound', saddle.energy.total,
                                 state['path'].target, state['composer'].slack))
    outputs = {'valleys': [v.provenance for v in valleys], 'pairs': table.to_dict(),
               'winner': saddle.to_dict(),
               'lower_bound': lower_bound_check(saddle, eps).to_dict()}
    return outputs, checks


def stage_varifold(lab, state):
    saddle = state['saddle']
    mass = diffuse_mass(saddle.field, lab.g, lab.p)
    report = multiplicity(saddle.field, lab.g, lab.p, state['eps'],
                          cluster_factor=lab.settings.get('MULTIPLICITY_CLUSTER_FACTOR', 12.0))
    state['mass'] = mass.total
    state['multiplicity'] = report
    total = saddle.energy.total
    defect = abs(mass.total - total) / max(abs(total), 1e-300)
    checks = [BoundCheck('mass energy agreement', defect, MASS_ENERGY_TOL, 0.0)]
    return {'mass': mass.to_dict(), 'multiplicity': report.to_dict()}, checks


EPS_STAGES = [
    ('admissible', stage_admissible),
    ('path', stage_path),
    ('barrier', stage_barrier),
    ('relax', stage_relax),
    ('minmax', stage_minmax),
    ('varifold', stage_varifold),
]


def new_state(eps, out=None, threads=1):
    eps = eps if isinstance(eps, Epsilon) else Epsilon(eps)
    return {'eps': eps, 'out': out, 'artifacts': {}, 'threads': threads}


def run_stages(lab, state, upto):
    """
    Calibrate (once per Lab) and run the eps stages up to and including `upto`.

    Returns the bound checks collected on the way; errors propagate with the
    stage id attached.
    """
    names = [name for name, _ in EPS_STAGES]
    if upto not in names:
        raise InputError(f"Unknown stage '{upto}'")
    checks = []
    plan = EPS_STAGES[:names.index(upto) + 1]
    if lab.cc is None:
        plan = [('calibrate', stage_calibrate)] + plan
    for name, stage in plan:
        try:
            _, stage_checks = stage(lab, state)
        except LabError as exc:
            exc.details['stage'] = name
            raise
        checks.extend(c for c in stage_checks if c is not None)
    return checks


# -- reproduce ----------------------------------------------------------------

def run_pipeline(scenario, out_dir, eps=None, settings=None, threads=1, version=''):
    """
    Calibrate, then run every eps stage once.

    Returns (RunReport, error). On a stage failure the remaining stages are
    marked skipped and the error is returned with its stage id attached.
    The report and a separate timings.json are written under out_dir.
    """
    lab = prepare(scenario, settings)
    eps = Epsilon(min(scenario.eps) if eps is None else eps)
    out = create_output_dir(out_dir)
    report = RunReport(scenario=scenario, version=version)
    state = {'eps': eps, 'out': out, 'artifacts': report.artifacts, 'threads': threads}
    timings = {}
    error = None
    for name, stage in [('calibrate', stage_calibrate)] + EPS_STAGES:
        record = report.stage(name)
        if error is not None:
            record.status = 'skipped'
            continue
        started = time.perf_counter()
        try:
            outputs, checks = stage(lab, state)
            record.status = 'ok'
            report.results[name] = outputs
            report.checks.extend(c for c in checks if c is not None)
        except LabError as exc:
            record.status = 'failed'
            record.message = f'{type(exc).__name__}: {exc.message}'
            exc.details['stage'] = name
            error = exc
            logger.error("stage %s failed: %s", name, exc.message)
        timings[name] = time.perf_counter() - started

    report.results['eps'] = eps.value
    write_json(os.path.join(out, 'report.json'), report.to_dict())
    write_json(os.path.join(out, 'timings.json'), timings)
    logger.info("pipeline %s at eps=%.4g: %d checks, %d failed", scenario.name, eps.value,
                len(report.checks), len(report.failed_checks))
    return report, error


# -- continuation sweep -------------------------------------------------------

SWEEP_COLUMNS = ['eps', 'admissible', 'failed_conditions', 'path_max', 'path_target',
                 'path_margin', 'minmax_value', 'saddle_energy', 'saddle_mass', 'ratio',
                 'multiplicity', 'hole_transition_energy', 'status']


def _sweep_row(lab, value, threads):
    state = new_state(value, threads=threads)
    status = 'ok'
    checks = []
    for name, stage in EPS_STAGES:
        try:
            _, stage_checks = stage(lab, state)
            checks.extend(c for c in stage_checks if c is not None)
        except LabError as exc:
            status = f'{name}: {type(exc).__name__}'
            logger.warning("sweep row eps=%.4g flagged at %s: %s", value, name, exc.message)
            break
    verdict = state.get('admissibility')
    path = state.get('path')
    saddle = state.get('saddle')
    report = state.get('multiplicity')
    row = [
        value,
        None if verdict is None else verdict.passed,
        None if verdict is None else ';'.join(verdict.failed),
        None if path is None else path.global_max,
        None if path is None else path.target,
        None if path is None else path.target - path.global_max,
        state.get('minmax_value'),
        None if saddle is None else saddle.energy.total,
        state.get('mass'),
        None if report is None else report.ratio,
        None if report is None else report.verdict,
        state.get('hole_transition_energy'),
        status,
    ]
    passes = {c.name: c.passed for c in checks}
    return row, passes


def _fitted_order(eps_values, values):
    pairs = [(e, v) for e, v in zip(eps_values, values) if v is not None and v > 0]
    if len(pairs) < 2:
        return None
    x = np.log([e for e, _ in pairs])
    y = np.log([v for _, v in pairs])
    return float(np.polyfit(x, y, 1)[0])


def epsilon_sweep(scenario, eps_list=None, out_dir=None, settings=None, threads=1):
    """
    One row per eps (largest first) plus a summary of the trends.

    A failing stage flags its row and the sweep continues.
    """
    lab = prepare(scenario, settings)
    stage_calibrate(lab, {'out': None, 'artifacts': {}})
    values = sorted(eps_list or scenario.eps, reverse=True)
    threads = max(1, int(threads))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        outcomes = list(pool.map(lambda v: _sweep_row(lab, v, 1), values))

    table = Table(list(SWEEP_COLUMNS))
    bound_rows = []
    for value, (row, passes) in zip(values, outcomes):
        table.append(*row)
        bound_rows.append((value, passes))

    minmax = table.column('minmax_value')
    cauchy = []
    for a, b in zip(minmax[:-1], minmax[1:]):
        if a is not None and b is not None:
            cauchy.append(abs(a - b) / max(abs(b), 1e-300))
    verdicts = [v for v in table.column('multiplicity') if v is not None]
    mass_defects = [abs(m - e) / max(abs(e), 1e-300)
                    for m, e in zip(table.column('saddle_mass'), table.column('saddle_energy'))
                    if m is not None and e is not None]
    summary = {
        'eps': values,
        'flagged': [row[0] for row in table.rows if row[-1] != 'ok'],
        'thresholds': empirical_thresholds(bound_rows),
        'energy_floor': energy_floor(zip(values, table.column('saddle_energy'))),
        'minmax_cauchy': cauchy,
        'minmax_converging': bool(cauchy) and cauchy[-1] <= CAUCHY_TOL,
        'multiplicity_stable': bool(verdicts) and all(v == 1 for v in verdicts[-2:]),
        'mass_energy_max_defect': max(mass_defects) if mass_defects else None,
        'hole_transition_order': _fitted_order(values, table.column('hole_transition_energy')),
        'eps_star': lab.eps_star,
    }
    if out_dir is not None:
        out = create_output_dir(out_dir)
        write_table(os.path.join(out, 'sweep.csv'), table)
        write_json(os.path.join(out, 'sweep.json'), summary)
    return table, summary
