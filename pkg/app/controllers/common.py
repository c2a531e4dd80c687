# app/controllers/common.py
"""
Helpers shared by the command controllers.

A controller returns `(payload, status)` the way an HTTP view returns
`(jsonify(...), code)`; `respond` echoes the payload as JSON and turns the
status into the process exit code.
"""
import click
from flask import current_app

from app.exceptions import BoundViolation, ConfigError, DomainError, InputError
from app.models import Epsilon
from app.services.scenario_service import load_scenario
from app.services.storage_service import create_output_dir

SETTING_KEYS = ['TOL_EIG_SCALE', 'TOL_RES_SCALE', 'DT_FRACTION', 'MAX_FLOW_STEPS',
                'MONITOR_EVERY', 'STRING_NODES', 'STRING_MAX_ITER', 'STRING_PERTURBATION',
                'DEDUP_TOL', 'ERR_CONSTANT', 'PATH_MAX_SAMPLES', 'MULTIPLICITY_CLUSTER_FACTOR']

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUND = 4


def exit_code(exc):
    if isinstance(exc, (ConfigError, InputError)):
        return EXIT_CONFIG
    if isinstance(exc, BoundViolation):
        return EXIT_BOUND
    return EXIT_NUMERICAL


def failure(exc):
    """(payload, status) for a LabError, logged through the app logger."""
    current_app.logger.error("%s: %s", type(exc).__name__, exc.message)
    return exc.to_dict(), exit_code(exc)


def respond(result):
    payload, status = result
    click.echo(current_app.json.dumps(payload, indent=2))
    if status:
        raise SystemExit(status)


def settings():
    return {key: current_app.config[key] for key in SETTING_KEYS if key in current_app.config}


def threads(requested=None):
    """Worker count, capped by AC_MINMAX_THREADS."""
    cap = current_app.config.get('THREADS', 1)
    return max(1, min(cap, requested or cap))


def load(name):
    return load_scenario(name, current_app.config['SCENARIO_DIR'])


def out_dir(value, *parts):
    return create_output_dir(value or current_app.config['OUTPUT_DIR'], *parts)


def pick_eps(scenario, value=None):
    """Requested eps, else the smallest one the scenario lists."""
    return float(value) if value is not None else min(scenario.eps)


def checks_payload(checks):
    return {'checks': [c.to_dict() for c in checks],
            'failed': [c.name for c in checks if not c.passed]}


def bound_status(checks):
    """EXIT_BOUND when any bound check failed, whatever the admissibility mode."""
    failed = [c.name for c in checks if not c.passed]
    if failed:
        current_app.logger.warning("%d bound check(s) failed: %s", len(failed), ', '.join(failed))
        return EXIT_BOUND
    return EXIT_OK


def as_eps(value):
    """Epsilon from a command flag; out of range is a usage error."""
    try:
        return Epsilon(value)
    except DomainError as exc:
        raise InputError(exc.message, eps=value)


scenario_option = click.option('--scenario', 'scenario_name', required=True,
                               help='Scenario name under the scenario directory, or a path.')
eps_option = click.option('--eps', 'eps_value', type=float, default=None,
                          help='Interface width eps (default: smallest listed in the scenario).')
out_option = click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
                          help='Output directory (default: AC_MINMAX_OUTPUT).')
