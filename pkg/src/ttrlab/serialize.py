"""Matrix (de)serialization for spec and report files.

A complex matrix travels as a row-major nested list where each entry is a
two-element [re, im] list.  Parsing errors carry the offending row/column so
callers can anchor schema messages.
"""

from __future__ import annotations

import numpy as np


class MatrixFormatError(ValueError):
    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


def matrix_to_pairs(m: np.ndarray) -> list[list[list[float]]]:
    m = np.asarray(m, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in m]


def pairs_to_matrix(data: object, location: str = "matrix") -> np.ndarray:
    if not isinstance(data, (list, tuple)) or not data:
        raise MatrixFormatError("expected a non-empty list of rows", location)
    n_cols = None
    rows: list[list[complex]] = []
    for i, row in enumerate(data):
        if not isinstance(row, (list, tuple)) or not row:
            raise MatrixFormatError("row is not a non-empty list", f"{location}[{i}]")
        if n_cols is None:
            n_cols = len(row)
        elif len(row) != n_cols:
            raise MatrixFormatError(
                f"ragged row of length {len(row)}, expected {n_cols}", f"{location}[{i}]"
            )
        parsed: list[complex] = []
        for j, entry in enumerate(row):
            if (
                not isinstance(entry, (list, tuple))
                or len(entry) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
            ):
                raise MatrixFormatError(
                    "entry must be a [re, im] pair of numbers", f"{location}[{i}][{j}]"
                )
            parsed.append(complex(float(entry[0]), float(entry[1])))
        rows.append(parsed)
    return np.array(rows, dtype=complex)
