# app/services/storage_service.py
"""
Run artifacts on disk: field files, CSV tables and JSON reports.

A field file is one header line `dims=... lengths=... eps=...` followed by
the row-major node values, one per line, printed with 17 significant digits
so a re-read is bitwise exact.
"""
import csv
import json
import logging
import os

import numpy as np

from app.exceptions import InputError
from app.models import Grid

logger = logging.getLogger(__name__)


def create_output_dir(out_dir, *parts):
    """
    Create (if needed) and return the directory for a run's artifacts.

    Raises:
        InputError: the path exists and is not a directory.
    """
    path = os.path.join(out_dir, *parts)
    if os.path.exists(path) and not os.path.isdir(path):
        raise InputError(f"Output path {path} is not a directory")
    os.makedirs(path, exist_ok=True)
    return path


def _join(values, fmt):
    return ','.join(fmt % v for v in values)


def write_field(path, u, grid, eps=None):
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise InputError("Field does not match the grid", expected=list(grid.shape), got=list(u.shape))
    header = f"dims={_join(grid.dims, '%d')} lengths={_join(grid.lengths, '%.17g')}"
    if eps is not None:
        header += f" eps={float(eps):.17g}"
    np.savetxt(path, u.ravel(), fmt='%.17g', header=header, comments='')
    logger.debug("wrote field %s", path)
    return path


def read_field(path):
    """
    Returns:
        (Field, Grid, eps or None)
    """
    try:
        with open(path, 'r') as f:
            header = f.readline().split()
            values = np.loadtxt(f, ndmin=1)
    except OSError as exc:
        raise InputError(f"Cannot read field file {path}: {exc}")
    meta = dict(item.split('=', 1) for item in header if '=' in item)
    if 'dims' not in meta or 'lengths' not in meta:
        raise InputError(f"Field file {path} has no dims/lengths header")
    grid = Grid([int(x) for x in meta['dims'].split(',')],
                [float(x) for x in meta['lengths'].split(',')])
    if values.size != grid.size:
        raise InputError(f"Field file {path} holds {values.size} values for {grid.size} nodes")
    eps = float(meta['eps']) if 'eps' in meta else None
    return values.reshape(grid.shape), grid, eps


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


def write_table(path, table):
    """CSV with a header row; floats at full precision, None as an empty cell."""
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def dumps(payload):
    return json.dumps(payload, sort_keys=True, indent=2, default=_default)


def write_json(path, payload):
    with open(path, 'w') as f:
        f.write(dumps(payload))
        f.write('\n')
    return path
