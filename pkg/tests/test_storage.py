# tests/test_storage.py
import csv

import numpy as np
import pytest

from app.exceptions import InputError
from app.models import Grid, Table
from app.services.storage_service import (create_output_dir, dumps, read_field, write_field,
                                          write_table)


def test_field_file_is_bitwise_exact(tmp_path):
    grid = Grid((8, 12), (1.5, 2.0))
    u = np.random.default_rng(3).standard_normal(grid.shape) / 3.0
    path = write_field(tmp_path / 'u.txt', u, grid, eps=0.05)
    read, read_grid, eps = read_field(path)
    assert np.array_equal(read, u)
    assert read_grid.same_as(grid)
    assert eps == 0.05


def test_field_without_eps(tmp_path):
    grid = Grid((8,), (1.0,))
    _, _, eps = read_field(write_field(tmp_path / 'u.txt', np.zeros(8), grid))
    assert eps is None


def test_field_shape_mismatch(tmp_path):
    with pytest.raises(InputError):
        write_field(tmp_path / 'u.txt', np.zeros(7), Grid((8,), (1.0,)))


def test_field_file_errors(tmp_path):
    with pytest.raises(InputError):
        read_field(tmp_path / 'missing.txt')
    bad = tmp_path / 'bad.txt'
    bad.write_text('dims=8 lengths=1\n0\n1\n')
    with pytest.raises(InputError):
        read_field(bad)
    headless = tmp_path / 'headless.txt'
    headless.write_text('0\n1\n')
    with pytest.raises(InputError):
        read_field(headless)


def test_table_csv(tmp_path):
    table = Table(['eps', 'value', 'passed'])
    table.append(0.1, None, True)
    table.append(0.05, 1.0 / 3.0, False)
    path = write_table(tmp_path / 't.csv', table)
    with open(path, newline='') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['eps', 'value', 'passed']
    assert rows[1] == ['0.10000000000000001', '', 'true']
    assert float(rows[2][1]) == 1.0 / 3.0
    assert rows[2][2] == 'false'


def test_output_dir(tmp_path):
    path = create_output_dir(str(tmp_path), 'neck', 'eps_0.02')
    assert (tmp_path / 'neck' / 'eps_0.02').is_dir()
    assert create_output_dir(str(tmp_path), 'neck', 'eps_0.02') == path
    blocker = tmp_path / 'file'
    blocker.write_text('x')
    with pytest.raises(InputError):
        create_output_dir(str(blocker))


def test_dumps_sorts_and_converts():
    text = dumps({'b': np.float64(0.5), 'a': np.arange(2), 'c': Table(['x'])})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert '"columns"' in text
