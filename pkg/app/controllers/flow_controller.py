# app/controllers/flow_controller.py
import os

import click
from flask import current_app

from app.controllers.common import (as_eps, bound_status, checks_payload, eps_option, failure,
                                    load, out_dir, out_option, pick_eps, respond, scenario_option,
                                    settings)
from app.exceptions import InputError, LabError
from app.models import FlowTrace, Table
from app.services.storage_service import write_field, write_table
from app.services.sweep_service import new_state, prepare, run_stages


@scenario_option
@eps_option
@click.option('--mu', type=float, default=None, help='Forcing constant (default: automatic).')
@click.option('--dt', type=float, default=None, help='Time step (at most eps^2/4).')
@click.option('--max-steps', 'max_steps', type=int, default=None)
@click.option('--trace-out', 'trace_out', type=click.Path(dir_okay=False), default=None,
              help='CSV trace of the forced flow.')
@click.option('--limit-out', 'limit_out', type=click.Path(dir_okay=False), default=None,
              help='Field file for the relaxed critical point.')
@out_option
def relax(scenario_name, eps_value, mu, dt, max_steps, trace_out, limit_out, out):
    """Relax the end of the explicit path by the two-stage mean-convex flow."""
    try:
        scenario = load(scenario_name)
        eps = as_eps(pick_eps(scenario, eps_value))
        if mu is not None:
            if mu <= 0:
                raise InputError("--mu must be positive", mu=mu)
            scenario.flow['mu'] = mu
        if dt is not None:
            scenario.flow['dt_fraction'] = dt / eps.value ** 2
        if max_steps is not None:
            scenario.flow['max_steps'] = max_steps
        lab = prepare(scenario, settings())
        target = out_dir(out, scenario.name, f'eps_{eps.value:g}')
        state = new_state(eps, out=target)
        checks = run_stages(lab, state, 'relax')

        result = state['relax']
        trace = result.first_stage.trace
        table = Table(list(FlowTrace.COLUMNS), trace.rows())
        write_table(trace_out or os.path.join(target, 'trace.csv'), table)
        if limit_out:
            write_field(limit_out, result.critical_point.field, lab.g.grid, eps.value)

        payload = result.to_dict()
        payload.update(checks_payload(checks))
        payload['artifacts'] = dict(sorted(state['artifacts'].items()))
        payload['out'] = target
        current_app.logger.info("relaxed at eps=%.4g: %s", eps.value, result.critical_point.verdict)
        return respond((payload, bound_status(checks)))
    except LabError as exc:
        return respond(failure(exc))
