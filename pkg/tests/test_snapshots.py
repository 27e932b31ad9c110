import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from aggrekit.domain import build_grid
from aggrekit.snapshots import (
    read_series,
    read_snapshot,
    snapshot_name,
    snapshot_text,
    write_series,
    write_snapshot,
)


def test_snapshot_name_uses_shortest_repr():
    assert snapshot_name(0.1) == "t_0.1.csv"
    assert snapshot_name(50) == "t_50.0.csv"


def test_1d_layout_and_round_trip(tmp_path, rng):
    g = build_grid(1, 1.0, 8)
    u = rng.uniform(size=8)
    text = snapshot_text(g, u, 0.25)
    lines = text.splitlines()
    assert lines[:6] == ["# d = 1", "# nx = 8", "# ny = 1", "# hx = 0.125", "# hy = 0.0",
                         "# t = 0.25"]
    assert len(lines) == 6 + 8
    write_snapshot(tmp_path / "s.csv", g, u, 0.25)
    back, meta = read_snapshot(tmp_path / "s.csv")
    assert np.array_equal(back, u)
    assert meta["t"] == "0.25"


def test_2d_rows_hold_x_values(tmp_path, rng):
    g = build_grid(2, (1.0, 2.0), (4, 5))
    u = rng.uniform(size=(4, 5))
    lines = snapshot_text(g, u, 1.0).splitlines()[6:]
    assert len(lines) == 5 and all(len(ln.split(",")) == 4 for ln in lines)
    write_snapshot(tmp_path / "s.csv", g, u, 1.0, {"gamma": "0.5"})
    back, meta = read_snapshot(tmp_path / "s.csv")
    assert np.array_equal(back, u)
    assert meta["gamma"] == "0.5"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=20))
def test_series_round_trip_is_exact(tmp_path_factory, vals):
    path = tmp_path_factory.mktemp("s") / "series.csv"
    rows = {"t": np.arange(len(vals), dtype=float), "x": np.array(vals)}
    write_series(path, rows, ("t", "x"))
    back = read_series(path)
    assert np.array_equal(back["x"], rows["x"])
