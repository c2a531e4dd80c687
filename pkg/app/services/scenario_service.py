# app/services/scenario_service.py
"""
Scenario files: INI text with [grid], [metric], [potential], [surface],
[run], [flow], [minmax] and [tolerances] sections.
"""
import configparser
import logging
import math
import os

import numpy as np

from app.exceptions import ConfigError, InputError
from app.models import Grid, Hypersurface, Potential, Scenario
from app.services.domain_service import build_metric

logger = logging.getLogger(__name__)

REQUIRED = [('grid', 'dims'), ('grid', 'lengths'), ('run', 'eps')]
METRIC_FAMILIES = ('flat', 'neck', 'table')
POTENTIAL_KINDS = ('standard', 'table')
ADMISSIBILITY_MODES = ('strict', 'report')
EPS_CEILING = math.exp(-1)


def _floats(text):
    return [float(x) for x in str(text).replace(',', ' ').split()]


def _ints(text):
    return [int(x) for x in str(text).replace(',', ' ').split()]


def _read(source):
    """ConfigParser from a path, raw INI text or a dict of sections."""
    parser = configparser.ConfigParser()
    if isinstance(source, configparser.ConfigParser):
        return source
    if isinstance(source, dict):
        parser.read_dict(source)
        return parser
    try:
        parser.read_string(source)
    except configparser.Error as exc:
        raise ConfigError("Scenario is not valid INI", errors=[('file', str(exc))])
    return parser


def _resolve(base_dir, path):
    if path is None or os.path.isabs(path) or base_dir is None:
        return path
    return os.path.join(base_dir, path)


def validate_config(source, base_dir=None):
    """
    Schema, range and cross-field checks.

    Returns a list of (field, message) pairs; an empty list means the
    scenario is valid.
    """
    cfg = _read(source)
    errors = []
    for section, key in REQUIRED:
        if not cfg.has_option(section, key):
            errors.append((f'{section}.{key}', 'missing required key'))

    dims = lengths = None
    if cfg.has_option('grid', 'dims'):
        try:
            dims = _ints(cfg.get('grid', 'dims'))
            if not 1 <= len(dims) <= 3:
                errors.append(('grid.dims', 'need 1 to 3 axes'))
            elif any(n < 8 for n in dims):
                errors.append(('grid.dims', 'every axis needs at least 8 nodes'))
        except ValueError:
            errors.append(('grid.dims', 'expected a list of integers'))
            dims = None
    if cfg.has_option('grid', 'lengths'):
        try:
            lengths = _floats(cfg.get('grid', 'lengths'))
            if any(not math.isfinite(x) or x <= 0 for x in lengths):
                errors.append(('grid.lengths', 'periods must be positive'))
        except ValueError:
            errors.append(('grid.lengths', 'expected a list of numbers'))
            lengths = None
    if dims is not None and lengths is not None and len(dims) != len(lengths):
        errors.append(('grid.lengths', f'{len(lengths)} lengths for {len(dims)} axes'))

    if cfg.has_option('run', 'eps'):
        try:
            eps = _floats(cfg.get('run', 'eps'))
            if not eps:
                errors.append(('run.eps', 'empty list'))
            for value in eps:
                if not 0 < value < EPS_CEILING:
                    errors.append(('run.eps', f'{value} is outside (0, 1/e)'))
        except ValueError:
            errors.append(('run.eps', 'expected a list of numbers'))

    family = cfg.get('metric', 'family', fallback='flat')
    if family not in METRIC_FAMILIES:
        errors.append(('metric.family', f"unknown family '{family}'"))
    if family == 'neck':
        try:
            amplitude = cfg.getfloat('metric', 'amplitude', fallback=0.5)
            if not 0 <= abs(amplitude) < 1:
                errors.append(('metric.amplitude', 'must satisfy |a| < 1'))
        except ValueError:
            errors.append(('metric.amplitude', 'expected a number'))
    if family == 'table':
        table = _resolve(base_dir, cfg.get('metric', 'table', fallback=None))
        if table is None or not os.path.isfile(table):
            errors.append(('metric.table', 'referenced file does not exist'))
    if dims is not None and len(dims) == 1 and family == 'neck':
        errors.append(('metric.family', 'a neck needs at least two axes'))

    kind = cfg.get('potential', 'kind', fallback='standard')
    if kind not in POTENTIAL_KINDS:
        errors.append(('potential.kind', f"unknown kind '{kind}'"))
    if kind == 'table':
        table = _resolve(base_dir, cfg.get('potential', 'table', fallback=None))
        if table is None or not os.path.isfile(table):
            errors.append(('potential.table', 'referenced file does not exist'))
    try:
        if cfg.getfloat('potential', 'scale', fallback=1.0) <= 0:
            errors.append(('potential.scale', 'must be positive'))
    except ValueError:
        errors.append(('potential.scale', 'expected a number'))

    mode = cfg.get('run', 'admissibility', fallback='strict')
    if mode not in ADMISSIBILITY_MODES:
        errors.append(('run.admissibility', f"expected one of {', '.join(ADMISSIBILITY_MODES)}"))
    try:
        cfg.getint('run', 'seed', fallback=7)
    except ValueError:
        errors.append(('run.seed', 'expected an integer'))
    try:
        level = cfg.getfloat('surface', 'level', fallback=0.0)
        if lengths and dims and len(dims) == len(lengths) and not 0 <= level < lengths[-1]:
            errors.append(('surface.level', 'must lie in [0, fibre period)'))
    except ValueError:
        errors.append(('surface.level', 'expected a number'))

    for section in ('tolerances', 'flow', 'minmax'):
        if cfg.has_section(section):
            for key, value in cfg.items(section):
                try:
                    float(value)
                except ValueError:
                    errors.append((f'{section}.{key}', 'expected a number'))
    for seed_file in _floats_or_paths(cfg.get('run', 'seeds', fallback='')):
        if not os.path.isfile(_resolve(base_dir, seed_file)):
            errors.append(('run.seeds', f"seed file '{seed_file}' does not exist"))
    return errors


def _floats_or_paths(text):
    return [part.strip() for part in text.split(',') if part.strip()]


def _numbers(cfg, section):
    if not cfg.has_section(section):
        return {}
    out = {}
    for key, value in cfg.items(section):
        number = float(value)
        out[key] = int(number) if number.is_integer() and 'tol' not in key else number
    return out


def parse_scenario(source, name='scenario', base_dir=None):
    """Validated Scenario from INI text, a dict of sections or a ConfigParser."""
    cfg = _read(source)
    errors = validate_config(cfg, base_dir)
    if errors:
        raise ConfigError(f"Scenario '{name}' is invalid", errors=errors)
    family = cfg.get('metric', 'family', fallback='flat')
    metric_params = {}
    if family == 'neck':
        metric_params['amplitude'] = cfg.getfloat('metric', 'amplitude', fallback=0.5)
        if cfg.has_option('metric', 'wavelength'):
            metric_params['wavelength'] = cfg.getfloat('metric', 'wavelength')
    elif family == 'table':
        metric_params['table'] = _resolve(base_dir, cfg.get('metric', 'table'))
    table = cfg.get('potential', 'table', fallback=None)
    return Scenario(
        name=cfg.get('run', 'name', fallback=name),
        dims=_ints(cfg.get('grid', 'dims')),
        lengths=_floats(cfg.get('grid', 'lengths')),
        metric_family=family,
        metric_params=metric_params,
        potential_kind=cfg.get('potential', 'kind', fallback='standard'),
        potential_scale=cfg.getfloat('potential', 'scale', fallback=1.0),
        potential_table=_resolve(base_dir, table),
        level=cfg.getfloat('surface', 'level', fallback=0.0),
        eps=sorted(_floats(cfg.get('run', 'eps')), reverse=True),
        seed=cfg.getint('run', 'seed', fallback=7),
        admissibility=cfg.get('run', 'admissibility', fallback='strict'),
        tolerances=_numbers(cfg, 'tolerances'),
        flow=_numbers(cfg, 'flow'),
        minmax=_numbers(cfg, 'minmax'),
        seeds=[_resolve(base_dir, s) for s in _floats_or_paths(cfg.get('run', 'seeds', fallback=''))],
        output=cfg.get('run', 'output', fallback=None),
    )


def load_scenario(name_or_path, scenario_dir):
    """
    Read a scenario by file path or by name under scenario_dir.

    Raises:
        ConfigError: the file is missing or invalid.
    """
    path = name_or_path
    if not os.path.isfile(path):
        candidate = os.path.join(scenario_dir, f'{name_or_path}.ini')
        if not os.path.isfile(candidate):
            raise ConfigError(f"Scenario '{name_or_path}' not found",
                              errors=[('scenario', f'no file {candidate}')])
        path = candidate
    with open(path, 'r') as f:
        text = f.read()
    name = os.path.splitext(os.path.basename(path))[0]
    scenario = parse_scenario(text, name=name, base_dir=os.path.dirname(os.path.abspath(path)))
    scenario.source = path
    logger.info("loaded scenario %s from %s", scenario.name, path)
    return scenario


# -- builders -----------------------------------------------------------------

def build_grid(scenario):
    return Grid(scenario.dims, scenario.lengths)


def build_metric_for(scenario, grid=None):
    grid = grid or build_grid(scenario)
    return build_metric(grid, scenario.metric_family, **scenario.metric_params)


def build_potential(scenario):
    if scenario.potential_kind == 'table':
        try:
            table = np.loadtxt(scenario.potential_table, delimiter=',', ndmin=2)
        except OSError as exc:
            raise InputError(f"Cannot read potential table: {exc}")
        return Potential('table', scale=scenario.potential_scale, table=table,
                         source=scenario.potential_table)
    return Potential('standard', scale=scenario.potential_scale)


def build_surface(scenario, g):
    """Flat graph at the fibre row nearest the configured level."""
    grid = g.grid
    row = int(round(scenario.level / grid.spacing[-1])) % grid.dims[-1]
    return Hypersurface(grid, row, np.zeros(grid.shape[:-1]))
