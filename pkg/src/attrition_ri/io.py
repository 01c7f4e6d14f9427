"""CSV input and JSON reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Union

from .core import Dataset
from .decision import Decision
from .errors import InvariantViolation, ParseError

HEADER = ("y", "d", "r")
TIMING_FIELDS = frozenset({"runtime_ms", "runtime_quantiles"})


def _bit(text: str, name: str, row: int) -> int:
    text = text.strip()
    if text not in ("0", "1"):
        raise ParseError(f"{name} must be 0 or 1, got {text!r}", row)
    return int(text)


def load_csv(path) -> Dataset:
    """Read a ``y,d,r`` file; ``y`` is empty for units that did not report.

    Row numbers in errors count the header as row 1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        if tuple(h.strip().lower() for h in header) != HEADER:
            raise ParseError(f"header must be y,d,r, got {','.join(header)}", 1)
        ys, ds, rs = [], [], []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise ParseError(f"expected 3 fields, got {len(row)}", row_no)
            y_text, d_text, r_text = row
            d = _bit(d_text, "d", row_no)
            r = _bit(r_text, "r", row_no)
            y_text = y_text.strip()
            if y_text:
                try:
                    y = float(y_text)
                except ValueError:
                    raise ParseError(f"y is not a number: {y_text!r}", row_no) from None
                if not math.isfinite(y):
                    raise ParseError("y must be finite", row_no)
            else:
                y = None
            if (y is not None) != bool(r):
                rule = "y present with r=0" if y is not None else "y missing with r=1"
                raise InvariantViolation(f"row {row_no}: {rule}; y must be present iff r=1")
            ys.append(y)
            ds.append(d)
            rs.append(r)
    return Dataset(tuple(ys), tuple(ds), tuple(rs))


def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for y, d, r in zip(dataset.outcomes, dataset.assignments, dataset.reports):
            w.writerow(["" if y is None else repr(y), d, r])


def report_dict(obj: Union[Decision, dict]) -> dict:
    return obj.to_json() if isinstance(obj, Decision) else dict(obj)


def dumps(obj, *, include_timing: bool = True) -> str:
    """Canonical JSON text (sorted keys) for a Decision or study report."""
    data = report_dict(obj)
    if not include_timing:
        data = strip_timing(data)
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=True) + "\n"


def strip_timing(data):
    if isinstance(data, dict):
        return {k: strip_timing(v) for k, v in data.items() if k not in TIMING_FIELDS}
    if isinstance(data, list):
        return [strip_timing(v) for v in data]
    return data


def write_report(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load_report(path):
    """Inverse of `write_report`; a Decision comes back as a Decision."""
    data = json.loads(Path(path).read_text())
    if "reject" in data and "mode" in data and "reps" not in data:
        return Decision.from_json(data)
    return data
