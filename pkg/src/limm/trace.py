"""Per-step trace records and their CSV round trip."""

from __future__ import annotations

import csv
from typing import NamedTuple

import numpy as np

TRACE_COLUMNS = ("t", "h", "k", "err_norm", "accepted")


class TraceRecord(NamedTuple):
    """One attempted step.

    ``t`` is the time the step reached (or would have reached if rejected),
    ``h`` the step size, ``k`` the order used.  ``y`` is stored only on
    accepted rows.
    """

    t: float
    h: float
    k: int
    err_norm: float
    accepted: bool
    y: np.ndarray | None = None


def fmt(x: float) -> str:
    """Float formatted with 17 significant digits, enough to round-trip."""
    return format(float(x), ".17g")


def write_trace_csv(path, trace, dimension: int | None = None) -> None:
    """Write ``t,h,k,err_norm,accepted,y0..y{N-1}`` with one row per record.

    ``path`` may also be an open text file.
    """
    if dimension is None:
        dimension = next((r.y.size for r in trace if r.y is not None), 0)
    if hasattr(path, "write"):
        _write_rows(path, trace, dimension)
    else:
        with open(path, "w", newline="") as fh:
            _write_rows(fh, trace, dimension)


def _write_rows(fh, trace, dimension: int) -> None:
    w = csv.writer(fh)
    w.writerow(list(TRACE_COLUMNS) + [f"y{i}" for i in range(dimension)])
    for r in trace:
        row = [fmt(r.t), fmt(r.h), str(int(r.k)), fmt(r.err_norm), str(int(bool(r.accepted)))]
        if r.accepted and r.y is not None:
            row += [fmt(v) for v in r.y]
        else:
            row += [""] * dimension
        w.writerow(row)


def read_trace_csv(path) -> list[TraceRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_y = len(header) - len(TRACE_COLUMNS)
        for row in reader:
            y = None
            if n_y and row[len(TRACE_COLUMNS)] != "":
                y = np.array([float(v) for v in row[len(TRACE_COLUMNS) :]])
            out.append(
                TraceRecord(float(row[0]), float(row[1]), int(row[2]), float(row[3]), row[4] == "1", y)
            )
    return out
