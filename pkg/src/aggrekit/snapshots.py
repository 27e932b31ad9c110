"""Snapshot and series file formats.

A snapshot is a text file with ``#`` metadata lines (d, nx, ny, hx, hy, t)
followed by one value per line in 1D, or ny rows of nx comma-separated
values in 2D (row ``j`` holds u[:, j]).  Floats are written with ``repr``,
the shortest string that round-trips.
"""

from __future__ import annotations

import os

import numpy as np

from .domain import Grid

META_KEYS = ("d", "nx", "ny", "hx", "hy", "t")


def fmt(x: float) -> str:
    return repr(float(x))


def snapshot_name(t: float) -> str:
    return f"t_{fmt(t)}.csv"


def snapshot_text(grid: Grid, u: np.ndarray, t: float, extra: dict | None = None) -> str:
    nx = grid.resolution[0]
    ny = grid.resolution[1] if grid.d == 2 else 1
    hx = grid.spacing[0]
    hy = grid.spacing[1] if grid.d == 2 else 0.0
    meta = {"d": grid.d, "nx": nx, "ny": ny, "hx": fmt(hx), "hy": fmt(hy), "t": fmt(t)}
    lines = [f"# {k} = {meta[k]}" for k in META_KEYS]
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {v}")
    if grid.d == 1:
        lines.extend(fmt(v) for v in u)
    else:
        for j in range(ny):
            lines.append(",".join(fmt(v) for v in u[:, j]))
    return "\n".join(lines) + "\n"


def write_snapshot(path, grid: Grid, u, t, extra=None) -> None:
    with open(path, "w") as fh:
        fh.write(snapshot_text(grid, u, t, extra))


def read_snapshot(path) -> tuple[np.ndarray, dict]:
    meta = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad snapshot value: {line!r}") from exc
    for k in ("d", "nx", "ny"):
        if k not in meta:
            raise ValueError(f"{path}: missing '# {k} = ...' header")
    d, nx, ny = int(meta["d"]), int(meta["nx"]), int(meta["ny"])
    if d == 1:
        u = np.array([r[0] for r in rows])
        if u.size != nx or any(len(r) != 1 for r in rows):
            raise ValueError(f"{path}: expected {nx} single values")
    else:
        if len(rows) != ny or any(len(r) != nx for r in rows):
            raise ValueError(f"{path}: expected {ny} rows of {nx} values")
        u = np.array(rows).T
    return u, meta


def write_series(path, rows: dict, columns) -> None:
    n = len(rows[columns[0]])
    with open(path, "w") as fh:
        fh.write(",".join(columns) + "\n")
        for i in range(n):
            fh.write(",".join(fmt(rows[c][i]) for c in columns) + "\n")


def read_series(path) -> dict:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [list(map(float, ln.split(","))) for ln in fh if ln.strip()]
    arr = np.array(data).reshape(-1, len(header))
    return {k: arr[:, i] for i, k in enumerate(header)}


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
