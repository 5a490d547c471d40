"""CSV and JSON helpers shared by the CLI.

Matrices: comma separated, no header, one row per line. Vectors: one value
per line. Floats are written with 17 significant digits so they round-trip.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np


class CSVFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _parse_float(token: str, path, line: int) -> float:
    token = token.strip()
    try:
        value = float(token)
    except ValueError:
        raise CSVFormatError(path, line, f"not a number: {token!r}") from None
    if not math.isfinite(value):
        raise CSVFormatError(path, line, f"non-finite value: {token!r}")
    return value


def read_matrix_csv(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            row = [_parse_float(tok, path, lineno) for tok in raw.split(",")]
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise CSVFormatError(path, lineno, f"expected {width} columns, found {len(row)}")
            rows.append(row)
    if not rows:
        raise CSVFormatError(path, 1, "empty matrix file")
    return np.array(rows, dtype=np.float64)


def read_vector_csv(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            tokens = raw.split(",")
            if len(tokens) != 1:
                raise CSVFormatError(path, lineno, "expected one value per line")
            values.append(_parse_float(tokens[0], path, lineno))
    if not values:
        raise CSVFormatError(path, 1, "empty vector file")
    return np.array(values, dtype=np.float64)


def write_matrix_csv(path, A) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in A:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_vector_csv(path, v) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x in np.asarray(v, dtype=np.float64).ravel():
            fh.write(fmt(x) + "\n")


def write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
