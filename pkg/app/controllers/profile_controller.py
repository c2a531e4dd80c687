# app/controllers/profile_controller.py
import os

import click
from flask import current_app

from app.controllers.common import as_eps, failure, out_dir, respond
from app.exceptions import InputError, LabError
from app.services.profile_service import (collapsing_energy, energy_convergence_table,
                                          layer_energy, profile_table, truncation_residual)
from app.services.storage_service import write_table


@click.option('--eps', 'eps_value', type=float, required=True, help='Interface width eps.')
@click.option('--t', 't_value', type=float, default=0.0, show_default=True,
              help='Collapse parameter of Psi_t.')
@click.option('--samples', type=int, default=401, show_default=True)
@click.option('--out', 'out', type=click.Path(), default=None, help='Output directory.')
@click.option('--convergence', type=str, default='0.2,0.1,0.05,0.025', show_default=True,
              help='Comma separated eps list for the convergence table.')
def profile1d(eps_value, t_value, samples, out, convergence):
    """
    Sample H_eps, its truncation and Psi_t, and tabulate the layer energies.

    Writes profile.csv and convergence.csv; prints the energies as JSON.
    """
    try:
        if samples < 3:
            raise InputError("--samples must be at least 3", samples=samples)
        try:
            eps_list = [float(x) for x in convergence.split(',') if x.strip()]
        except ValueError:
            raise InputError("--convergence expects numbers", value=convergence)
        eps = as_eps(eps_value)
        target = out_dir(out, 'profile1d')

        write_table(os.path.join(target, 'profile.csv'), profile_table(eps, t_value, samples=samples))
        table, slope = energy_convergence_table(eps_list)
        write_table(os.path.join(target, 'convergence.csv'), table)
        residual, constant = truncation_residual(eps)

        energy_h = layer_energy(eps)
        payload = {
            'eps': eps.value,
            'Lambda': eps.Lambda,
            'energy_H': energy_h,
            'energy_H_defect': abs(energy_h - 1.0),
            'energy_truncated': layer_energy(eps, truncated=True),
            'energy_psi_t': collapsing_energy(eps, t_value),
            't': t_value,
            'truncation_residual': residual,
            'residual_constant': constant,
            'convergence_slope': slope,
            'artifacts': {'profile': 'profile.csv', 'convergence': 'convergence.csv'},
            'out': target,
        }
        current_app.logger.info("profile1d eps=%.4g: E(H)=%.8f", eps.value, energy_h)
        return respond((payload, 0))
    except LabError as exc:
        return respond(failure(exc))
