# app/controllers/reproduce_controller.py
import os

import click
from flask import current_app

from app import __version__
from app.controllers.common import (as_eps, bound_status, eps_option, exit_code, failure, load,
                                    out_dir, out_option, pick_eps, respond, scenario_option,
                                    settings, threads)
from app.exceptions import LabError
from app.services.sweep_service import run_pipeline


@scenario_option
@eps_option
@click.option('--threads', 'requested', type=int, default=None,
              help='Worker threads (capped by AC_MINMAX_THREADS).')
@click.option('--strict/--no-strict', default=None,
              help='Stop on an inadmissible eps (default: the scenario admissibility mode).')
@out_option
def reproduce(scenario_name, eps_value, requested, strict, out):
    """
    Run the whole pipeline on a named scenario.

    calibrate, admissibility, explicit path, barrier, two-stage relaxation,
    minmax and multiplicity, in that order. Writes report.json and
    timings.json plus every stage artifact.
    """
    try:
        scenario = load(scenario_name)
        if strict is not None:
            scenario.admissibility = 'strict' if strict else 'report'
        eps = as_eps(pick_eps(scenario, eps_value))
        target = out_dir(out or scenario.output, scenario.name, f'eps_{eps.value:g}')
        report, error = run_pipeline(scenario, target, eps=eps.value, settings=settings(),
                                     threads=threads(requested), version=__version__)
        payload = {
            'scenario': scenario.name,
            'eps': eps.value,
            'stages': [s.to_dict() for s in report.stages],
            'failed_checks': [c.to_dict() for c in report.failed_checks],
            'checks': len(report.checks),
            'report': os.path.join(target, 'report.json'),
            'out': target,
        }
        if 'varifold' in report.results:
            payload['multiplicity'] = report.results['varifold']['multiplicity']['verdict']
        if 'path' in report.results:
            payload['path_max'] = report.results['path']['global_max']
            payload['path_target'] = report.results['path']['target']
        if error is not None:
            payload['error'] = error.to_dict()
            current_app.logger.error("stage %s failed", error.details.get('stage'))
            return respond((payload, exit_code(error)))
        return respond((payload, bound_status(report.checks)))
    except LabError as exc:
        return respond(failure(exc))
