import numpy as np
import pytest

from figures.csvio import (MissingColumnError, SchemaError, array_checksum,
                           column, read_table)

from conftest import write_csv


def test_roundtrip(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], ["us", "1"],
                     [[1.0, 2.0], [3.0, 4.0]])
    t = read_table(path)
    assert t.names == ["a", "b"]
    assert t.units == {"a": "us", "b": "1"}
    assert np.allclose(column(t, "a"), [1.0, 2.0])
    assert t.n_rows == 2
    assert t.label("a") == "a (us)"
    assert t.label("b") == "b"     # dimensionless


def test_missing_column_named(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a"], ["1"], [[1.0]])
    t = read_table(path)
    with pytest.raises(MissingColumnError) as exc:
        column(t, "fidelity")
    assert exc.value.column == "fidelity"
    assert "fidelity" in str(exc.value)


def test_unitless_column_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\nus,\n1.0,2.0\n")
    with pytest.raises(SchemaError, match="declares no unit"):
        read_table(path)


def test_missing_unit_row_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\n")
    with pytest.raises(SchemaError):
        read_table(path)


def test_empty_table_rejected(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("a,b\nus,1\n")
    with pytest.raises(SchemaError, match="no data rows"):
        read_table(path)


def test_duplicate_and_nonnumeric_rejected(tmp_path):
    dup = tmp_path / "dup.csv"
    dup.write_text("a,a\n1,1\n1.0,2.0\n")
    with pytest.raises(SchemaError, match="duplicate"):
        read_table(dup)
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,1\n1.0,oops\n")
    with pytest.raises(SchemaError, match="not numeric"):
        read_table(bad)


def test_missing_file(tmp_path):
    with pytest.raises(SchemaError, match="not found"):
        read_table(tmp_path / "nope.csv")


def test_checksum_detects_change():
    a = np.array([1.0, 2.0, 3.0])
    assert array_checksum(a) == array_checksum(a.copy())
    assert array_checksum(a) != array_checksum(a + 1e-12)
