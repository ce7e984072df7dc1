import struct

import numpy as np
import pytest

from logeuler.exceptions import ConfigurationError, InvalidFieldError
from logeuler.field import mode
from logeuler.io import HEADER, read_field, read_snapshot, write_csv, write_snapshot


def test_round_trip(tmp_path):
    f = mode(16, (2, 1))
    p = tmp_path / "a.fld"
    write_snapshot(p, f)
    assert np.array_equal(read_field(p).values, f.values)
    raw = p.read_bytes()
    assert len(raw) == 16 + 8 * 256
    assert struct.unpack("<4sHHII", raw[:16]) == (b"LGEU", 1, 16, 0, 0)
    assert np.array_equal(np.frombuffer(raw[16:], "<f8").reshape(16, 16), f.values)


def test_stack(tmp_path):
    p = tmp_path / "v.fld"
    layers = np.arange(2 * 8 * 8, dtype=float).reshape(2, 8, 8)
    write_snapshot(p, layers, kind="velocity")
    kind, back = read_snapshot(p)
    assert kind == "velocity" and np.array_equal(back, layers)
    with pytest.raises(ConfigurationError):
        read_field(p)


@pytest.mark.parametrize("blob", [b"", b"LGEU", HEADER.pack(b"NOPE", 1, 8, 0, 0) + bytes(512),
                                  HEADER.pack(b"LGEU", 9, 8, 0, 0) + bytes(512),
                                  HEADER.pack(b"LGEU", 1, 8, 0, 0) + bytes(100)])
def test_bad_files(tmp_path, blob):
    p = tmp_path / "bad.fld"
    p.write_bytes(blob)
    with pytest.raises(ConfigurationError):
        read_snapshot(p)


def test_missing(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        read_field(tmp_path / "missing.fld")


def test_bad_shape(tmp_path):
    with pytest.raises(InvalidFieldError):
        write_snapshot(tmp_path / "x.fld", np.zeros((4, 5)))


def test_csv_repr_floats(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ("a", "b"), [(0.1, "x"), (1 / 3, 2)])
    assert p.read_text().splitlines() == ["a,b", "0.1,x", "0.3333333333333333,2"]
