"""Reading and writing panels in the flat CSV layout.

One row per (person, period) with columns ``person_id, time, y1, y2``
followed by covariates. The prefix of a covariate column decides its role:
``x1_`` for the first equation, ``x2_`` for the second and ``xb_`` for a
person-level Mundlak average entering both equations. A variable shared by
the two equations simply appears once under each prefix.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .models.data import DataError, PanelData

HEADER = ("person_id", "time", "y1", "y2")


def _sort_key(values):
    """Numeric order if every label parses as a number, else lexical."""
    try:
        return [(float(v), v) for v in values]
    except ValueError:
        return [(0.0, v) for v in values]


def ingest_csv(path) -> PanelData:
    """Read a balanced panel from ``path``.

    Raises
    ------
    DataError
        On a missing header column, a missing or duplicated (person, period)
        cell, a non-numeric or NaN entry, a non-binary ``y1`` or an ``xb_``
        column that varies within a person.
    """
    if not os.path.isfile(path):
        raise DataError(f"data file {path} not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("data file is empty") from None
        rows = [r for r in reader if r]
    missing = [h for h in HEADER if h not in header]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")
    col = {h: j for j, h in enumerate(header)}
    x1 = [h for h in header if h.startswith("x1_")]
    x2 = [h for h in header if h.startswith("x2_")]
    xb = [h for h in header if h.startswith("xb_")]
    if not x1 or not x2:
        raise DataError("each equation needs at least one covariate column")
    numeric = ["y1", "y2"] + x1 + x2 + xb

    cells: dict[tuple[str, str], list[str]] = {}
    for ln, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise DataError(f"line {ln}: expected {len(header)} fields, found {len(r)}")
        key = (r[col["person_id"]].strip(), r[col["time"]].strip())
        if key in cells:
            raise DataError(f"duplicate row for person {key[0]}, time {key[1]}")
        cells[key] = r
    if not cells:
        raise DataError("data file has no rows")

    persons = sorted({p for p, _ in cells}, key=lambda v: _sort_key([v])[0])
    times = sorted({t for _, t in cells}, key=lambda v: _sort_key([v])[0])
    incomplete = [p for p in persons if any((p, t) not in cells for t in times)]
    if incomplete:
        raise DataError("unbalanced panel; incomplete person_id(s): " + ", ".join(incomplete))

    P, T = len(persons), len(times)
    vals = np.empty((P, T, len(numeric)))
    for i, p in enumerate(persons):
        for t, tt in enumerate(times):
            r = cells[(p, tt)]
            for j, name in enumerate(numeric):
                try:
                    vals[i, t, j] = float(r[col[name]])
                except ValueError:
                    raise DataError(f"non-numeric {name} for person {p}, time {tt}") from None
    bad = ~np.isfinite(vals)
    if bad.any():
        i, t, j = np.argwhere(bad)[0]
        raise DataError(f"missing or non-finite {numeric[j]} for person {persons[i]}, "
                        f"time {times[t]}")
    y1, y2 = vals[..., 0], vals[..., 1]
    if not np.all((y1 == 0.0) | (y1 == 1.0)):
        raise DataError("y1 must be coded 0/1")
    n1, n2 = len(x1), len(x2)
    X1 = vals[..., 2:2 + n1]
    X2 = vals[..., 2 + n1:2 + n1 + n2]
    B = vals[..., 2 + n1 + n2:]
    if B.shape[2] and not np.all(B == B[:, :1, :]):
        raise DataError("xb_ columns must be constant within each person")
    xbar = B[:, 0, :]
    strip = lambda names: [n[3:] for n in names]  # noqa: E731
    return PanelData(y1=y1, y2=y2, X1=X1, X2=X2, xbar1=xbar, xbar2=xbar.copy(),
                     names1=strip(x1), names2=strip(x2), names_bar1=strip(xb),
                     names_bar2=strip(xb))


def write_csv(data: PanelData, path, person_ids=None, times=None) -> None:
    """Write ``data`` so that :func:`ingest_csv` restores it bit for bit.

    Floats are written with their shortest round-trip representation. The
    Mundlak block is shared by both equations, so ``xbar1`` and ``xbar2``
    must be equal.
    """
    if not (np.array_equal(data.xbar1, data.xbar2) and
            list(data.names_bar1) == list(data.names_bar2)):
        raise DataError("the CSV layout stores one Mundlak block shared by both equations")
    P, T = data.P, data.T
    person_ids = list(range(P)) if person_ids is None else list(person_ids)
    times = list(range(T)) if times is None else list(times)
    header = (list(HEADER) + [f"x1_{n}" for n in data.names1] +
              [f"x2_{n}" for n in data.names2] + [f"xb_{n}" for n in data.names_bar1])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(P):
            xb = [repr(float(v)) for v in data.xbar1[i]]
            for t in range(T):
                w.writerow([person_ids[i], times[t], repr(float(data.y1[i, t])),
                            repr(float(data.y2[i, t]))] +
                           [repr(float(v)) for v in data.X1[i, t]] +
                           [repr(float(v)) for v in data.X2[i, t]] + xb)
