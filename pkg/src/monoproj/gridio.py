"""CSV formats for grids, bands and datasets.

Grid files have a header ``axis1,...,axisd,value`` and one row per lattice
point in any order; band files end in ``lower,upper`` instead of ``value``.
Coordinates outside [0, 1] are mapped affinely onto the unit interval per
axis and mapped back on output.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bands import Band
from .lattice import GridFunction, Lattice


class GridFormatError(ValueError):
    pass


@dataclass(frozen=True)
class GridTable:
    """A parsed grid file: lattice, value columns and what is needed to write it back."""

    lattice: Lattice
    axis_names: tuple[str, ...]
    original_axes: tuple[np.ndarray, ...]
    columns: dict[str, np.ndarray]
    tokens: dict[str, list[str]]  # raw value text in storage order
    axis_tokens: tuple[list[str], ...] = ()  # raw coordinate text per axis

    def grid(self, name: str = "value") -> GridFunction:
        return GridFunction(self.lattice, self.columns[name])

    def to_unit(self, points: np.ndarray) -> np.ndarray:
        out = np.empty_like(points, dtype=float)
        for j, (orig, unit) in enumerate(zip(self.original_axes, self.lattice.axes)):
            out[:, j] = np.interp(points[:, j], orig, unit) if orig.size > 1 else unit[0]
            outside = (points[:, j] < orig[0]) | (points[:, j] > orig[-1])
            out[outside, j] = np.where(points[outside, j] < orig[0], -np.inf, np.inf)
        return out


def _unit_axis(orig: np.ndarray) -> np.ndarray:
    if orig[0] >= 0.0 and orig[-1] <= 1.0:
        return orig
    if orig.size == 1:
        return np.array([0.5])
    return (orig - orig[0]) / (orig[-1] - orig[0])


def _parse_float(text: str, line: int, col: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise GridFormatError(f"line {line}: column {col!r} is not a number: {text!r}") from None
    if not np.isfinite(x):
        raise GridFormatError(f"line {line}: column {col!r} is not finite")
    return x


def read_table(path, value_columns: Sequence[str]) -> GridTable:
    with open(path, newline="") as fh:
        return parse_table(fh.read(), value_columns)


def parse_table(text: str, value_columns: Sequence[str]) -> GridTable:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise GridFormatError("line 1: file is empty") from None
    k = len(value_columns)
    if len(header) <= k or [h.lower() for h in header[-k:]] != list(value_columns):
        raise GridFormatError(f"line 1: header must end with {','.join(value_columns)}")
    d = len(header) - k
    coords, vals, raw, coord_raw = [], [], [], []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise GridFormatError(f"line {line}: expected {len(header)} fields, got {len(row)}")
        coords.append([_parse_float(row[j], line, header[j]) for j in range(d)])
        vals.append([_parse_float(row[d + j], line, value_columns[j]) for j in range(k)])
        raw.append([row[d + j].strip() for j in range(k)])
        coord_raw.append([row[j].strip() for j in range(d)])
    if not coords:
        raise GridFormatError("file has no data rows")
    coords = np.array(coords)
    original = tuple(np.unique(coords[:, j]) for j in range(d))
    shape = tuple(ax.size for ax in original)
    if int(np.prod(shape)) != len(coords):
        raise GridFormatError(
            f"rows do not form a rectangular grid: {len(coords)} rows for axes of sizes {shape}"
        )
    idx = np.stack([np.searchsorted(original[j], coords[:, j]) for j in range(d)], axis=1)
    flat = np.ravel_multi_index(tuple(idx.T), shape)
    if np.unique(flat).size != flat.size:
        dup = int(np.flatnonzero(np.bincount(flat) > 1)[0])
        raise GridFormatError(f"duplicate grid point at index {np.unravel_index(dup, shape)}")
    axis_tokens = tuple(
        [coord_raw[int(np.flatnonzero(idx[:, j] == i)[0])][j] for i in range(shape[j])] for j in range(d)
    )
    order = np.argsort(flat)
    vals = np.array(vals)[order]
    raw = [raw[i] for i in order]
    lattice = Lattice([_unit_axis(ax) for ax in original])
    return GridTable(
        lattice,
        tuple(header[:d]),
        original,
        {c: vals[:, j] for j, c in enumerate(value_columns)},
        {c: [r[j] for r in raw] for j, c in enumerate(value_columns)},
        axis_tokens,
    )


def read_grid(path) -> GridTable:
    return read_table(path, ("value",))


def read_band(path, level: float = 0.95) -> tuple[GridTable, Band]:
    table = read_table(path, ("lower", "upper"))
    bad = np.flatnonzero(table.columns["lower"] > table.columns["upper"])
    if bad.size:
        where = np.unravel_index(int(bad[0]), table.lattice.shape)
        raise GridFormatError(f"lower exceeds upper at grid point {tuple(int(i) for i in where)}")
    return table, Band(table.grid("lower"), table.grid("upper"), level)


def _fmt(x: float, token: str | None) -> str:
    if token is not None:
        try:
            if float(token) == x:
                return token
        except ValueError:
            pass
    return repr(float(x))


def format_table(table: GridTable, columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(table.axis_names) + list(columns))
    labels = table.axis_tokens or tuple([repr(float(x)) for x in ax] for ax in table.original_axes)
    for i in range(table.lattice.size):
        pos = np.unravel_index(i, table.lattice.shape)
        row = [labels[j][p] for j, p in enumerate(pos)]
        for name, vals in columns.items():
            tok = table.tokens.get(name)
            row.append(_fmt(vals[i], tok[i] if tok else None))
        w.writerow(row)
    return buf.getvalue()


def grid_table_for(lattice: Lattice, axis_names: Sequence[str] | None = None) -> GridTable:
    names = tuple(axis_names or [f"axis{j + 1}" for j in range(lattice.dims)])
    return GridTable(lattice, names, lattice.axes, {}, {})


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def format_rows(rows: list[dict]) -> str:
    """Delimited text for a list of flat dicts sharing keys; floats round-trip exactly."""
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(rows[0])
    w.writerow(keys)
    for r in rows:
        w.writerow([_cell(r[k]) for k in keys])
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def parse_rows(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def dataset_text(data) -> str:
    """CSV for an ``ObsBinary`` (``y,a,w1,w2``) or ``ObsCont`` (``a,y``) sample."""
    names = ("y", "a", "w1", "w2") if hasattr(data, "w1") else ("a", "y")
    cols = [getattr(data, c) for c in names]
    rows = [dict(zip(names, vals)) for vals in zip(*cols)]
    return format_rows([{k: float(v) for k, v in r.items()} for r in rows])


def read_dataset(path, names: Sequence[str]) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip().lower() for h in next(reader, [])]
        if header != list(names):
            raise GridFormatError(f"line 1: dataset header must be {','.join(names)}")
        cols = [[] for _ in names]
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise GridFormatError(f"line {line}: expected {len(names)} fields, got {len(row)}")
            for j, c in enumerate(names):
                cols[j].append(_parse_float(row[j], line, c))
    return {c: np.array(v) for c, v in zip(names, cols)}
