from __future__ import annotations

import locale
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subdiffwr.csvout import Table, emit_csv, format_value, read_csv, table_text


def test_single_row_table(tmp_path):
    p = emit_csv(Table(["a"], [(1.5,)]), tmp_path / "t.csv")
    text = p.read_bytes()
    assert text == b"a\n1.5\n"
    assert len(text.decode().splitlines()) == 2


def test_tuple_form_and_subdirectories(tmp_path):
    p = emit_csv((["k", "v"], [(0, 2.0), (1, 0.5)]), tmp_path / "sub" / "x.csv")
    assert p.read_text() == "k,v\n0,2\n1,0.5\n"


def test_format_value_kinds():
    assert format_value(True) == "1" and format_value(np.bool_(False)) == "0"
    assert format_value(np.int64(7)) == "7"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(1e-300)) == "1e-300"
    assert format_value("both_sided") == "both_sided"
    assert format_value(float("nan")) == "nan"


@settings(max_examples=200, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_bit_exact(x):
    assert float(format_value(x)) == x


def test_table_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    rows = [("mesh", float(v), int(i)) for i, v in enumerate(rng.standard_normal(20) * 1e-7)]
    table = Table(["kind", "value", "index"], rows)
    back = read_csv(emit_csv(table, tmp_path / "r.csv"))
    assert back.header == table.header
    assert [r[1] for r in back.rows] == [r[1] for r in rows]
    assert back.column("kind") == ["mesh"] * 20


def test_row_width_checked():
    with pytest.raises(ValueError, match="row 0"):
        Table(["a", "b"], [(1.0,)])


def test_locale_does_not_change_separator():
    saved = locale.setlocale(locale.LC_NUMERIC)
    for name in ("de_DE.UTF-8", "fr_FR.UTF-8"):
        try:
            locale.setlocale(locale.LC_NUMERIC, name)
        except locale.Error:
            continue
        try:
            assert table_text(Table(["x"], [(0.25,)])) == "x\n0.25\n"
        finally:
            locale.setlocale(locale.LC_NUMERIC, saved)
    assert table_text(Table(["x"], [(0.25,)])) == "x\n0.25\n"


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_directory(tmp_path):
    d = tmp_path / "ro"
    d.mkdir()
    d.chmod(0o500)
    try:
        with pytest.raises(OSError, match="cannot write"):
            emit_csv(Table(["a"], [(1,)]), d / "x.csv")
    finally:
        d.chmod(0o700)


def test_path_through_a_file_fails(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="cannot write"):
        emit_csv(Table(["a"], [(1,)]), blocker / "x.csv")
