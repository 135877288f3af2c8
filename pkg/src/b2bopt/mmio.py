"""MatrixMarket reading and writing for the two supported layouts.

Exactly two header lines are accepted:

    %%MatrixMarket matrix coordinate real general
    %%MatrixMarket matrix array real general

Coordinate files load as :class:`SparseMatrix`, array files as dense
ndarrays (column-major entry order, per the format).  Entries must be
nonnegative for NMF use; loaders report offending entries and line numbers.
"""

from __future__ import annotations

import numpy as np

from .core import SparseMatrix

COORD_HEADER = "%%MatrixMarket matrix coordinate real general"
ARRAY_HEADER = "%%MatrixMarket matrix array real general"


class MatrixMarketError(ValueError):
    """Malformed MatrixMarket input."""


def load_matrix(path, nonnegative=True):
    """Read a MatrixMarket file into a dense ndarray or a SparseMatrix."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(f"{path}: empty file")
    header = lines[0].strip()
    if header == COORD_HEADER:
        return _parse_coordinate(lines, path, nonnegative)
    if header == ARRAY_HEADER:
        return _parse_array(lines, path, nonnegative)
    raise MatrixMarketError(
        f"{path}: unsupported header {header!r}; expected "
        f"{COORD_HEADER!r} or {ARRAY_HEADER!r}")


def _data_lines(lines):
    for lineno, raw in enumerate(lines[1:], start=2):
        text = raw.strip()
        if not text or text.startswith("%"):
            continue
        yield lineno, text


def _parse_size(fields, lineno, path, want):
    if len(fields) != want:
        raise MatrixMarketError(f"{path}:{lineno}: size line needs {want} integers")
    try:
        nums = [int(f) for f in fields]
    except ValueError as exc:
        raise MatrixMarketError(f"{path}:{lineno}: bad size line: {exc}") from exc
    if any(v < 0 for v in nums) or nums[0] == 0 or nums[1] == 0:
        raise MatrixMarketError(f"{path}:{lineno}: nonpositive dimensions")
    return nums


def _parse_coordinate(lines, path, nonnegative):
    it = _data_lines(lines)
    try:
        lineno, text = next(it)
    except StopIteration:
        raise MatrixMarketError(f"{path}: missing size line") from None
    rows, cols, nnz = _parse_size(text.split(), lineno, path, 3)
    ri = np.empty(nnz, dtype=np.int64)
    ci = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    k = 0
    for lineno, text in it:
        if k >= nnz:
            raise MatrixMarketError(f"{path}:{lineno}: more entries than the declared {nnz}")
        fields = text.split()
        if len(fields) != 3:
            raise MatrixMarketError(f"{path}:{lineno}: expected 'i j value'")
        try:
            i, j, v = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError as exc:
            raise MatrixMarketError(f"{path}:{lineno}: {exc}") from exc
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise MatrixMarketError(
                f"{path}:{lineno}: index ({i}, {j}) outside {rows} x {cols}")
        if not np.isfinite(v):
            raise MatrixMarketError(f"{path}:{lineno}: non-finite value")
        if nonnegative and v < 0:
            raise MatrixMarketError(
                f"{path}:{lineno}: negative entry {v} at ({i}, {j})")
        ri[k], ci[k], vals[k] = i - 1, j - 1, v
        k += 1
    if k != nnz:
        raise MatrixMarketError(f"{path}: declared {nnz} entries, found {k}")
    keep = vals != 0.0
    try:
        return SparseMatrix(rows, cols, ri[keep], ci[keep], vals[keep])
    except ValueError as exc:
        raise MatrixMarketError(f"{path}: {exc}") from exc


def _parse_array(lines, path, nonnegative):
    it = _data_lines(lines)
    try:
        lineno, text = next(it)
    except StopIteration:
        raise MatrixMarketError(f"{path}: missing size line") from None
    rows, cols = _parse_size(text.split(), lineno, path, 2)
    values = np.empty(rows * cols, dtype=np.float64)
    k = 0
    for lineno, text in it:
        for field in text.split():
            if k >= rows * cols:
                raise MatrixMarketError(
                    f"{path}:{lineno}: more than {rows * cols} entries")
            try:
                v = float(field)
            except ValueError as exc:
                raise MatrixMarketError(f"{path}:{lineno}: {exc}") from exc
            if not np.isfinite(v):
                raise MatrixMarketError(f"{path}:{lineno}: non-finite value")
            if nonnegative and v < 0:
                i = k % rows
                j = k // rows
                raise MatrixMarketError(
                    f"{path}:{lineno}: negative entry {v} at ({i + 1}, {j + 1})")
            values[k] = v
            k += 1
    if k != rows * cols:
        raise MatrixMarketError(f"{path}: expected {rows * cols} entries, found {k}")
    return values.reshape((cols, rows)).T.copy()  # file is column-major


def save_dense(path, M):
    """Write a dense matrix in array format (column-major entries)."""
    M = np.asarray(M, dtype=np.float64)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(ARRAY_HEADER + "\n")
        fh.write(f"{M.shape[0]} {M.shape[1]}\n")
        for v in M.T.ravel():
            fh.write(f"{float(v)!r}\n")


def save_sparse(path, S):
    """Write a SparseMatrix in coordinate format (1-based indices)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(COORD_HEADER + "\n")
        fh.write(f"{S.rows} {S.cols} {S.nnz}\n")
        for i, j, v in zip(S.row_idx, S.col_idx, S.values):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
