# app/controllers/calibration_controller.py
import os

import click
from flask import current_app

from app.controllers.common import (EXIT_BOUND, EXIT_CONFIG, as_eps, failure, load, out_dir,
                                    out_option, respond, scenario_option, settings)
from app.exceptions import ConfigError, LabError
from app.services.geometry_service import epsilon_admissibility
from app.services.sweep_service import prepare, stage_calibrate


@scenario_option
@out_option
def calibrate(scenario_name, out):
    """
    Calibrate the hypersurface of a scenario.

    Writes calibration.json (constants, independent verification and the
    admissibility threshold eps*).
    """
    try:
        scenario = load(scenario_name)
        lab = prepare(scenario, settings())
        target = out_dir(out, scenario.name)
        outputs, _ = stage_calibrate(lab, {'out': target, 'artifacts': {}})
        outputs['out'] = target
        outputs['artifact'] = os.path.join(target, 'calibration.json')
        current_app.logger.info("calibrated %s: tau=%.4g c0=%.4g z0=%.4g eps*=%s", scenario.name,
                                lab.cc.tau, lab.cc.c0, lab.cc.z0, lab.eps_star)
        return respond((outputs, 0))
    except LabError as exc:
        return respond(failure(exc))


@scenario_option
@click.option('--eps', 'eps_value', type=float, required=True, help='Interface width eps.')
def admissible(scenario_name, eps_value):
    """
    Print the smallness-condition verdict for one eps.

    Exits with 4 when a condition fails.
    """
    try:
        eps = as_eps(eps_value)
        scenario = load(scenario_name)
        lab = prepare(scenario, settings())
        stage_calibrate(lab, {'out': None, 'artifacts': {}})
        verdict = epsilon_admissibility(lab.cc, eps, lab.g, lab.curvature)
        payload = verdict.to_dict()
        payload['eps_star'] = lab.eps_star
        if not verdict.passed:
            current_app.logger.warning("eps=%.4g fails %s", eps.value, ', '.join(verdict.failed))
            return respond((payload, EXIT_BOUND))
        return respond((payload, 0))
    except LabError as exc:
        return respond(failure(exc))


@scenario_option
def check_config(scenario_name):
    """Validate a scenario file; exits with 2 and one line per bad field."""
    try:
        scenario = load(scenario_name)
        return respond(({'scenario': scenario.name, 'valid': True, 'errors': []}, 0))
    except ConfigError as exc:
        payload, _ = failure(exc)
        payload['valid'] = False
        return respond((payload, EXIT_CONFIG))
    except LabError as exc:
        return respond(failure(exc))

