import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from attractlab import io


@given(st.floats(allow_nan=False, allow_infinity=False))
@settings(max_examples=200, deadline=None)
def test_fmt_roundtrip(x):
    assert float(io.fmt(x)) == x


def test_fmt_special():
    assert io.fmt(float("inf")) == "inf" and io.fmt(-float("inf")) == "-inf"
    assert io.fmt(float("nan")) == "nan"


def test_csv_conventions(tmp_path):
    path = tmp_path / "t.csv"
    io.write_csv(path, ["a", "b"], [[0.1, 2], [1 / 3, 5]], {"seed": 1})
    raw = path.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    assert raw.splitlines()[0] == b"# seed=1"
    header, rows = io.read_csv(path)
    assert header == ["a", "b"] and rows[1, 0] == 1 / 3


def test_heatmap_and_ppm(tmp_path):
    vals = np.arange(6, dtype=float).reshape(2, 3)
    vals[0, 0] = np.nan
    io.write_heatmap(tmp_path / "g.grid", vals, (0, 1, 0, 1), {"seed": 0})
    lines = (tmp_path / "g.grid").read_text().splitlines()
    assert lines[1:3] == ["width 3", "height 2"]
    io.write_ppm(tmp_path / "g.ppm", vals)
    data = (tmp_path / "g.ppm").read_bytes()
    assert data.startswith(b"P6\n3 2\n255\n") and len(data) == len(b"P6\n3 2\n255\n") + 18


def test_config_hash_is_order_independent():
    assert io.config_hash({"a": 1, "b": [1, 2]}) == io.config_hash({"b": [1, 2], "a": 1})
