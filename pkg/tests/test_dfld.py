import json

import numpy as np
import pytest

from dispersive_profiles.dfld import DFLDError, read_dfld, read_family, read_header, write_dfld, write_slice_csv, write_trace_csv
from dispersive_profiles.field import Field, GridSpec, SequenceFamily


def test_roundtrip_c128(tmp_path, rng):
    g = GridSpec(2, 16, 10.0)
    fields = [Field(g, rng.normal(size=(2,) + g.shape) + 1j * rng.normal(size=(2,) + g.shape)) for _ in range(3)]
    path = tmp_path / "f.dfld"
    write_dfld(path, fields, meta={"note": "x"})
    back, header = read_dfld(path)
    assert header["count"] == 3 and header["N"] == 2 and header["meta"] == {"note": "x"}
    for a, b in zip(fields, back):
        np.testing.assert_array_equal(a.phys, b.phys)
        assert b.grid == g


def test_roundtrip_frequency_space_c64(tmp_path, rng):
    g = GridSpec(1, 32)
    fam = SequenceFamily.from_phys(rng.normal(size=(4, 1, 32)) + 0j, g)
    path = tmp_path / "fam.dfld"
    write_dfld(path, fam, dtype="c64", space="frequency")
    back, header = read_family(path)
    assert header["space"] == "frequency" and header["dtype"] == "c64"
    np.testing.assert_allclose(back.hat(), fam.hat(), atol=1e-6)


def test_header_is_one_sorted_json_line(tmp_path):
    g = GridSpec(1, 8)
    path = tmp_path / "h.dfld"
    write_dfld(path, Field(g, np.arange(8) + 0j))
    line = path.read_bytes().split(b"\n", 1)[0]
    obj = json.loads(line)
    assert list(obj) == sorted(obj)
    assert obj["format"] == "DFLD"
    # samples follow as little-endian complex128
    raw = np.frombuffer(path.read_bytes()[len(line) + 1 :], dtype="<c16")
    np.testing.assert_array_equal(raw.real, np.arange(8))


def test_corrupt_files_raise(tmp_path):
    g = GridSpec(1, 8)
    bad = tmp_path / "bad.dfld"
    bad.write_bytes(b"not json\n")
    with pytest.raises(DFLDError):
        read_header(bad)
    path = tmp_path / "short.dfld"
    write_dfld(path, Field(g, np.zeros(8)))
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(DFLDError):
        read_dfld(path)
    with pytest.raises(DFLDError):
        write_dfld(tmp_path / "x.dfld", [])
    with pytest.raises(DFLDError):
        write_dfld(tmp_path / "x.dfld", Field(g, np.zeros(8)), dtype="f8")
    with pytest.raises(DFLDError):
        write_dfld(tmp_path / "x.dfld", [Field(g, np.zeros(8)), Field(GridSpec(1, 16), np.zeros(16))])


def test_csv_writers(tmp_path):
    g = GridSpec(1, 8, 8.0)
    write_slice_csv(tmp_path / "s.csv", Field(g, np.arange(8) * 1j))
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "x,modulus" and rows[1].startswith("-4,4")
    write_trace_csv(tmp_path / "t.csv", {"n": [1, 2], "v": [0.5, 0.25]})
    assert (tmp_path / "t.csv").read_text().splitlines() == ["n,v", "1,0.5", "2,0.25"]
