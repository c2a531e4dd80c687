# app/controllers/varifold_controller.py
import click
from flask import current_app

from app.controllers.common import (as_eps, failure, load, out_dir, out_option, respond,
                                    scenario_option, settings, threads)
from app.exceptions import InputError, LabError
from app.models import Potential
from app.services.domain_service import flat_metric
from app.services.scenario_service import build_metric_for, build_potential
from app.services.storage_service import read_field
from app.services.sweep_service import epsilon_sweep
from app.services.varifold_service import coarea_mass, diffuse_mass, multiplicity


@click.option('--field', 'field_path', required=True, type=click.Path(exists=True, dir_okay=False),
              help='Field file (header line plus row-major values).')
@click.option('--scenario', 'scenario_name', default=None,
              help='Scenario supplying the metric and potential (default: flat, standard well).')
@click.option('--eps', 'eps_value', type=float, default=None,
              help='Interface width (default: the one stored in the field header).')
@click.option('--cluster-factor', 'cluster_factor', type=float, default=None,
              help='Interface components closer than this many eps*Lambda share a cluster.')
@click.option('--levels', type=int, default=20, show_default=True,
              help='Levels for the coarea cross-check.')
def varifold_mass(field_path, scenario_name, eps_value, cluster_factor, levels):
    """Diffuse mass, coarea cross-check and multiplicity verdict of a stored field."""
    try:
        u, grid, stored_eps = read_field(field_path)
        if scenario_name:
            scenario = load(scenario_name)
            g = build_metric_for(scenario, grid)
            p = build_potential(scenario)
        else:
            g, p = flat_metric(grid), Potential()
        if eps_value is None and stored_eps is None:
            raise InputError("No eps given and the field header carries none")
        eps = as_eps(eps_value if eps_value is not None else stored_eps)
        if levels < 2:
            raise InputError("--levels must be at least 2", levels=levels)
        factor = cluster_factor or current_app.config.get('MULTIPLICITY_CLUSTER_FACTOR', 12.0)

        mass = diffuse_mass(u, g, p)
        payload = {
            'eps': eps.value,
            'mass': mass.to_dict(),
            'coarea_mass': coarea_mass(u, g, p, levels=levels),
            'multiplicity': multiplicity(u, g, p, eps, cluster_factor=factor).to_dict(),
        }
        current_app.logger.info("varifold mass of %s: %.6g", field_path, mass.total)
        return respond((payload, 0))
    except LabError as exc:
        return respond(failure(exc))


@scenario_option
@click.option('--eps', 'eps_values', type=float, multiple=True,
              help='Repeatable; defaults to the scenario eps list.')
@click.option('--threads', 'requested', type=int, default=None,
              help='Rows computed in parallel (capped by AC_MINMAX_THREADS).')
@out_option
def sweep_eps(scenario_name, eps_values, requested, out):
    """
    Continuation in eps: one CSV row per eps plus a JSON trend summary.

    A failing stage flags its row; the sweep itself still exits with 0.
    """
    try:
        scenario = load(scenario_name)
        values = [as_eps(v).value for v in eps_values] or None
        target = out_dir(out, scenario.name, 'sweep')
        table, summary = epsilon_sweep(scenario, values, out_dir=target, settings=settings(),
                                       threads=threads(requested))
        payload = {'summary': summary, 'table': table.to_dict(),
                   'artifacts': {'table': 'sweep.csv', 'summary': 'sweep.json'}, 'out': target}
        current_app.logger.info("sweep over %d eps, %d flagged", len(table.rows),
                                len(summary['flagged']))
        return respond((payload, 0))
    except LabError as exc:
        return respond(failure(exc))
