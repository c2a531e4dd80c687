# app/controllers/path_controller.py
from flask import current_app

from app.controllers.common import (EXIT_BOUND, as_eps, checks_payload, eps_option, failure, load,
                                    out_dir, out_option, pick_eps, respond, scenario_option,
                                    settings)
from app.exceptions import LabError
from app.services.sweep_service import new_state, prepare, run_stages


@scenario_option
@eps_option
@out_option
def path_energy(scenario_name, eps_value, out):
    """
    Build the explicit sweepout and check every segment bound.

    Writes path_<segment>.csv (param, energy, running max, bound, margin) and
    exits with 4 when the composite bound fails.
    """
    try:
        scenario = load(scenario_name)
        eps = as_eps(pick_eps(scenario, eps_value))
        lab = prepare(scenario, settings())
        target = out_dir(out, scenario.name, f'eps_{eps.value:g}')
        state = new_state(eps, out=target)
        checks = run_stages(lab, state, 'path')

        composite = state['path']
        payload = {
            'eps': eps.value,
            'global_max': composite.global_max,
            'target': composite.target,
            'varsigma_required': composite.varsigma,
            'varsigma_achieved': composite.achieved_varsigma,
            'admissible': state['admissibility'].passed,
            'hole_transition_energy': state['hole_transition_energy'],
            'artifacts': dict(sorted(state['artifacts'].items())),
            'out': target,
        }
        payload.update(checks_payload(checks))
        passed = composite.composite_check().passed
        payload['passed'] = passed
        current_app.logger.info("path at eps=%.4g: max %.6g vs target %.6g", eps.value,
                                composite.global_max, composite.target)
        return respond((payload, 0 if passed else EXIT_BOUND))
    except LabError as exc:
        return respond(failure(exc))
