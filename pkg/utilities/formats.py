"""
This Source Code Form is subject to the terms of the Mozilla Public
License, v. 2.0. If a copy of the MPL was not distributed with this
file, You can obtain one at http://mozilla.org/MPL/2.0/.

File formats: numeric CSV in, JSON and CSV reports out.
"""

from __future__ import annotations

import csv
import io
import json
import math
from typing import TYPE_CHECKING, Any

import numpy as np

from .exceptions import DataError, RaoError
from .matrix_ops import validate_correlation

if TYPE_CHECKING:
    import pathlib
    from collections.abc import Iterable, Mapping

    from .matrix_ops import FloatArray

try:
    import orjson
except ModuleNotFoundError:
    HAS_ORJSON = False
else:
    HAS_ORJSON = True

__all__ = (
    "HAS_ORJSON",
    "dumps",
    "loads",
    "read_correlation",
    "read_sample",
    "to_csv",
)


def _default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def dumps(obj: Any, /) -> str:
    """Serialise to indented JSON. Floats keep their shortest round-trip representation."""
    if HAS_ORJSON:
        return orjson.dumps(obj, default=_default, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY).decode()
    return json.dumps(obj, default=_default, indent=2, ensure_ascii=False)


def loads(data: str | bytes, /) -> Any:
    if HAS_ORJSON:
        return orjson.loads(data)
    return json.loads(data)


def _parse_rows(text: Iterable[str], *, source: str) -> tuple[list[str] | None, FloatArray]:
    header: list[str] | None = None
    rows: list[list[float]] = []
    width: int | None = None

    for line, row in enumerate(csv.reader(text), start=1):
        if not any(cell.strip() for cell in row):
            continue
        if any(not cell.strip() for cell in row):
            raise DataError(f"{source}, line {line}: missing field.", line=line)
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            # only the first non-blank row may be a header.
            if header is None and width is None:
                header = [cell.strip() for cell in row]
                width = len(row)
                continue
            raise DataError(f"{source}, line {line}: non-numeric value.", line=line) from None

        if not all(math.isfinite(value) for value in values):
            raise DataError(f"{source}, line {line}: non-finite value.", line=line)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise DataError(f"{source}, line {line}: expected {width} fields, got {len(values)}.", line=line)
        rows.append(values)

    if not rows:
        raise DataError(f"{source} contains no numeric rows.")
    return header, np.array(rows, dtype=np.float64)


def _read_text(path: pathlib.Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"{str(path)!r} does not exist.") from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"{str(path)!r} could not be read: {exc}") from exc


def read_sample(path: pathlib.Path) -> FloatArray:
    """An n x p sample from a comma-delimited file, rows as observations. A non-numeric first row is a header."""
    _, sample = _parse_rows(io.StringIO(_read_text(path), newline=""), source=str(path))
    return sample


def read_correlation(path: pathlib.Path) -> FloatArray:
    """A p x p correlation matrix, checked for symmetry, unit diagonal and positive definiteness."""
    _, matrix = _parse_rows(io.StringIO(_read_text(path), newline=""), source=str(path))
    if matrix.shape[0] != matrix.shape[1]:
        raise DataError(f"{path} holds a {matrix.shape[0]} x {matrix.shape[1]} matrix; a correlation matrix is square.")
    try:
        return validate_correlation(matrix, name=f"R0 from {path}")
    except RaoError as exc:
        raise DataError(str(exc)) from exc


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else value


def to_csv(rows: Iterable[Mapping[str, Any]]) -> str:
    """Flat CSV with a header taken from the first row's keys."""
    rows = list(rows)
    if not rows:
        return ""
    buffer = io.StringIO(newline="")
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _csv_cell(value) for key, value in row.items()})
    return buffer.getvalue()
