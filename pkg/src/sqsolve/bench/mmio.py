"""Matrix Market reading and writing.

Supports ``matrix coordinate`` and ``matrix array`` objects with ``real``,
``integer`` or ``pattern`` fields and ``general``, ``symmetric`` or
``skew-symmetric`` symmetry.  Values are written with ``%.17g`` so a
write/read cycle reproduces every double exactly.  Malformed input raises
:class:`ParseError` carrying the offending line number.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

from ..errors import ParseError

__all__ = ["load_matrix_market", "save_matrix_market", "load_vector", "save_vector"]

_FIELDS = ("real", "integer", "pattern", "double")
_SYMMETRIES = ("general", "symmetric", "skew-symmetric")


def _content_lines(fh, start):
    """Yield ``(lineno, stripped)`` for non-comment, non-blank lines."""
    for lineno, line in enumerate(fh, start=start):
        text = line.strip()
        if text and not text.startswith("%"):
            yield lineno, text


def _parse_int(tok, lineno, path, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"bad {what} {tok!r}", lineno, path) from None


def _parse_float(tok, lineno, path):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"bad value {tok!r}", lineno, path) from None


def load_matrix_market(path):
    """Read a Matrix Market file.

    Coordinate files come back as ``scipy.sparse.csr_matrix`` (duplicate
    entries are summed, symmetric storage is expanded), array files as a
    dense ``ndarray``.
    """
    path = os.fspath(path)
    with open(path, encoding="ascii", errors="replace") as fh:
        header = fh.readline()
        tokens = header.split()
        if len(tokens) != 5 or tokens[0].lower() != "%%matrixmarket":
            raise ParseError("missing '%%MatrixMarket' banner", 1, path)
        obj, fmt, fld, sym = (t.lower() for t in tokens[1:])
        if obj != "matrix":
            raise ParseError(f"unsupported object {obj!r}", 1, path)
        if fmt not in ("coordinate", "array"):
            raise ParseError(f"unsupported format {fmt!r}", 1, path)
        if fld not in _FIELDS:
            raise ParseError(f"unsupported field {fld!r}", 1, path)
        if sym not in _SYMMETRIES:
            raise ParseError(f"unsupported symmetry {sym!r}", 1, path)
        if fld == "pattern" and fmt == "array":
            raise ParseError("pattern field requires coordinate format", 1, path)

        lines = _content_lines(fh, 2)
        try:
            lineno, size_line = next(lines)
        except StopIteration:
            raise ParseError("missing size line", 2, path) from None
        sizes = size_line.split()
        expected = 3 if fmt == "coordinate" else 2
        if len(sizes) != expected:
            raise ParseError(f"size line needs {expected} integers", lineno, path)
        dims = [_parse_int(t, lineno, path, "size") for t in sizes]
        if min(dims) < 0 or dims[0] == 0 or dims[1] == 0:
            raise ParseError("dimensions must be positive", lineno, path)
        m, n = dims[0], dims[1]
        if sym != "general" and m != n:
            raise ParseError(f"{sym} matrix must be square", lineno, path)
        if fmt == "coordinate":
            return _read_coordinate(lines, path, m, n, dims[2], fld, sym, lineno)
        return _read_array(lines, path, m, n, sym, lineno)


def _read_coordinate(lines, path, m, n, nnz, fld, sym, size_lineno):
    width = 2 if fld == "pattern" else 3
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.ones(nnz)
    count = 0
    last = size_lineno
    for lineno, text in lines:
        last = lineno
        if count == nnz:
            raise ParseError(f"more than the declared {nnz} entries", lineno, path)
        toks = text.split()
        if len(toks) != width:
            raise ParseError(f"expected {width} fields, got {len(toks)}", lineno, path)
        i = _parse_int(toks[0], lineno, path, "row index")
        j = _parse_int(toks[1], lineno, path, "column index")
        if not (1 <= i <= m and 1 <= j <= n):
            raise ParseError(f"index ({i}, {j}) outside {m}x{n}", lineno, path)
        if sym != "general" and j > i:
            raise ParseError("entry above the diagonal in symmetric storage", lineno, path)
        rows[count] = i - 1
        cols[count] = j - 1
        if width == 3:
            vals[count] = _parse_float(toks[2], lineno, path)
        count += 1
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}", last, path)
    if sym != "general":
        off = rows != cols
        sign = -1.0 if sym == "skew-symmetric" else 1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]),
                            np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    A = sp.coo_matrix((vals, (rows, cols)), shape=(m, n)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _read_array(lines, path, m, n, sym, size_lineno):
    if sym == "general":
        slots = [(i, j) for j in range(n) for i in range(m)]
    elif sym == "symmetric":
        slots = [(i, j) for j in range(n) for i in range(j, m)]
    else:
        slots = [(i, j) for j in range(n) for i in range(j + 1, m)]
    A = np.zeros((m, n))
    count = 0
    last = size_lineno
    for lineno, text in lines:
        last = lineno
        toks = text.split()
        if len(toks) != 1:
            raise ParseError(f"expected 1 field, got {len(toks)}", lineno, path)
        if count == len(slots):
            raise ParseError(f"more than the expected {len(slots)} values", lineno, path)
        i, j = slots[count]
        A[i, j] = _parse_float(toks[0], lineno, path)
        count += 1
    if count != len(slots):
        raise ParseError(f"expected {len(slots)} values, found {count}", last, path)
    if sym == "symmetric":
        A = A + np.tril(A, -1).T
    elif sym == "skew-symmetric":
        A = A - A.T
    return A


def save_matrix_market(path, A, comment=None) -> None:
    """Write ``A``: scipy sparse input as coordinate, dense as array."""
    lines = []
    if sp.issparse(A):
        coo = sp.coo_matrix(A)
        order = np.lexsort((coo.col, coo.row))
        lines.append("%%MatrixMarket matrix coordinate real general")
        if comment:
            lines.extend("%" + c for c in comment.splitlines())
        lines.append(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}")
        for i, j, v in zip(coo.row[order].tolist(), coo.col[order].tolist(),
                           coo.data[order].tolist()):
            lines.append(f"{i + 1} {j + 1} {v:.17g}")
    else:
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        lines.append("%%MatrixMarket matrix array real general")
        if comment:
            lines.extend("%" + c for c in comment.splitlines())
        lines.append(f"{A.shape[0]} {A.shape[1]}")
        lines.extend(f"{v:.17g}" for v in A.ravel(order="F").tolist())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_vector(path) -> np.ndarray:
    """Read a vector: a Matrix Market ``n x 1`` / ``1 x n`` file or plain text."""
    path = os.fspath(path)
    with open(path, encoding="ascii", errors="replace") as fh:
        first = fh.readline()
    if first.lower().startswith("%%matrixmarket"):
        A = load_matrix_market(path)
        A = A.toarray() if sp.issparse(A) else A
        if min(A.shape) != 1:
            raise ParseError(f"expected a vector, got a {A.shape[0]}x{A.shape[1]} matrix", 2, path)
        return A.ravel()
    values = []
    with open(path, encoding="ascii", errors="replace") as fh:
        for lineno, text in _content_lines(fh, 1):
            values.extend(_parse_float(t, lineno, path) for t in text.replace(",", " ").split())
    if not values:
        raise ParseError("no values", 1, path)
    return np.array(values)


def save_vector(path, v) -> None:
    v = np.asarray(v, dtype=np.float64).ravel()
    with open(path, "w", encoding="ascii") as fh:
        fh.write("".join(f"{x:.17g}\n" for x in v.tolist()))
