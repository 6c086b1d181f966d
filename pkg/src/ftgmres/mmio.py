"""Matrix Market coordinate reader/writer (real, general or symmetric)."""

from __future__ import annotations

import os

import numpy as np

from .sparse import SparseMatrix


class MatrixMarketError(ValueError):
    """Base class for Matrix Market parse failures."""


class MalformedHeaderError(MatrixMarketError):
    pass


class UnsupportedFieldError(MatrixMarketError):
    pass


class EntryIndexError(MatrixMarketError):
    pass


class MalformedEntryError(MatrixMarketError):
    pass


class MatrixMarketIOError(OSError):
    pass


def _parse_header(line: str) -> str:
    tokens = line.strip().split()
    if len(tokens) != 5 or tokens[0] != "%%MatrixMarket":
        raise MalformedHeaderError(f"not a Matrix Market header: {line.strip()!r}")
    obj, fmt, fld, sym = (t.lower() for t in tokens[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MalformedHeaderError(f"only 'matrix coordinate' is supported, got {obj!r} {fmt!r}")
    if fld != "real":
        raise UnsupportedFieldError(f"only the 'real' field is supported, got {fld!r}")
    if sym not in ("general", "symmetric"):
        raise MalformedHeaderError(f"symmetry must be general or symmetric, got {sym!r}")
    return sym


def read_matrix_market(path) -> SparseMatrix:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise MatrixMarketIOError(f"cannot read {path}: {exc}") from exc

    lines = text.splitlines()
    if not lines:
        raise MalformedHeaderError("empty file")
    symmetry = _parse_header(lines[0])

    body = (ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%"))
    try:
        size_line = next(body)
    except StopIteration:
        raise MalformedHeaderError("missing size line") from None
    try:
        nrows, ncols, nnz = (int(t) for t in size_line.split())
    except ValueError:
        raise MalformedHeaderError(f"bad size line: {size_line!r}") from None
    if min(nrows, ncols, nnz) < 0:
        raise MalformedHeaderError(f"negative size in {size_line!r}")
    if symmetry == "symmetric" and nrows != ncols:
        raise MalformedHeaderError("symmetric matrix must be square")

    entries = list(body)
    if len(entries) != nnz:
        raise MalformedEntryError(f"header declares {nnz} entries, found {len(entries)}")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for k, ln in enumerate(entries):
        parts = ln.split()
        if len(parts) != 3:
            raise MalformedEntryError(f"entry {k + 1}: expected 'row col value', got {ln!r}")
        try:
            rows[k] = int(parts[0])
            cols[k] = int(parts[1])
            vals[k] = float(parts[2])
        except ValueError:
            raise MalformedEntryError(f"entry {k + 1}: cannot parse {ln!r}") from None
    if nnz:
        bad = (rows < 1) | (rows > nrows) | (cols < 1) | (cols > ncols)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise EntryIndexError(
                f"entry {k + 1}: index ({rows[k]}, {cols[k]}) outside {nrows}x{ncols}")
    if not np.all(np.isfinite(vals)):
        raise MalformedEntryError("non-finite value in file")
    rows -= 1
    cols -= 1
    if symmetry == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return SparseMatrix.from_coo(nrows, ncols, rows, cols, vals)


def write_matrix_market(A: SparseMatrix, path, symmetric: bool = False, comment: str | None = None):
    """Write ``A`` in coordinate format; ``symmetric`` stores the lower triangle only."""
    counts = np.diff(A.row_offsets)
    rows = np.repeat(np.arange(A.nrows), counts)
    cols = A.col_indices
    vals = A.values
    if symmetric:
        if A.nrows != A.ncols:
            raise ValueError("symmetric output needs a square matrix")
        keep = rows >= cols
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {'symmetric' if symmetric else 'general'}\n")
        if comment:
            for ln in comment.splitlines():
                fh.write(f"% {ln}\n")
        fh.write(f"{A.nrows} {A.ncols} {vals.size}\n")
        for r, c, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            fh.write(f"{r + 1} {c + 1} {v!r}\n")
    os.replace(tmp, path)
