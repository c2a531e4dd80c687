# app/controllers/minmax_controller.py
import click
from flask import current_app

from app.controllers.common import (as_eps, checks_payload, eps_option, failure, load, out_dir,
                                    out_option, pick_eps, respond, scenario_option, settings,
                                    threads)
from app.exceptions import InputError, LabError
from app.services.sweep_service import new_state, prepare, stage_minmax


@scenario_option
@eps_option
@click.option('--valleys-from', 'valleys_from', multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help='Field file seeding a valley; repeatable. The constants -1 and +1 are always used.')
@click.option('--nodes', type=int, default=None, help='String nodes per mountain pass.')
@click.option('--threads', 'requested', type=int, default=None,
              help='Worker threads for the pair enumeration (capped by AC_MINMAX_THREADS).')
@out_option
def minmax(scenario_name, eps_value, valleys_from, nodes, requested, out):
    """
    Mountain passes between every pair of harvested valleys.

    Writes minmax_pairs.csv and saddle.field; prints the pair table and the
    winning saddle.
    """
    try:
        scenario = load(scenario_name)
        eps = as_eps(pick_eps(scenario, eps_value))
        if valleys_from:
            scenario.seeds = list(valleys_from)
        if nodes is not None:
            if nodes < 3:
                raise InputError("--nodes must be at least 3", nodes=nodes)
            scenario.minmax['nodes'] = nodes
        lab = prepare(scenario, settings())
        target = out_dir(out, scenario.name, f'eps_{eps.value:g}')
        state = new_state(eps, out=target, threads=threads(requested))
        outputs, checks = stage_minmax(lab, state)

        payload = {
            'eps': eps.value,
            'table': outputs['pairs'],
            'valleys': outputs['valleys'],
            'winner': outputs['winner'],
            'lower_bound': outputs['lower_bound'],
            'saddle_field': state['artifacts'].get('saddle'),
            'out': target,
        }
        payload.update(checks_payload(checks))
        current_app.logger.info("minmax at eps=%.4g: value %.6g", eps.value, state['minmax_value'])
        return respond((payload, 0))
    except LabError as exc:
        return respond(failure(exc))
