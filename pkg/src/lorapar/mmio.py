"""Reader/writer for the plain-text matrix exchange format.

Supports the coordinate and dense array variants, real or integer fields,
general or symmetric storage. Parse failures report the offending line
number. Values are written with 17 significant digits so write/read
round-trips are exact at double precision.
"""

from __future__ import annotations

import os

import numpy as np

from .lowrank import LowRankMatrix


class MatrixMarketError(ValueError):
    """Malformed matrix file; message carries the line number."""


def _fail(path: str, lineno: int, msg: str):
    raise MatrixMarketError(f"{path}:{lineno}: {msg}")


def load_matrix_market(path: str) -> np.ndarray:
    """Read a matrix from a coordinate or array format text file."""
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError(f"{path}:1: empty file")

    header = lines[0].split()
    if len(header) < 5 or header[0] != "%%MatrixMarket" or header[1].lower() != "matrix":
        _fail(path, 1, "expected header '%%MatrixMarket matrix <format> <field> <symmetry>'")
    fmt, field, symmetry = (w.lower() for w in header[2:5])
    if fmt not in ("coordinate", "array"):
        _fail(path, 1, f"unsupported format {fmt!r}")
    if field not in ("real", "integer"):
        _fail(path, 1, f"unsupported field {field!r}")
    if symmetry not in ("general", "symmetric"):
        _fail(path, 1, f"unsupported symmetry {symmetry!r}")

    # Skip comments, find the size line.
    i = 1
    while i < len(lines) and (lines[i].startswith("%") or not lines[i].strip()):
        i += 1
    if i == len(lines):
        _fail(path, len(lines), "missing size line")
    size = lines[i].split()
    want = 3 if fmt == "coordinate" else 2
    if len(size) != want:
        _fail(path, i + 1, f"size line needs {want} integers")
    try:
        dims = [int(w) for w in size]
    except ValueError:
        _fail(path, i + 1, "size line needs integers")
    m, n = dims[0], dims[1]
    if m < 0 or n < 0:
        _fail(path, i + 1, "negative dimensions")
    X = np.zeros((m, n))

    if fmt == "coordinate":
        nnz = dims[2]
        count = 0
        for lineno in range(i + 1, len(lines)):
            raw = lines[lineno].strip()
            if not raw or raw.startswith("%"):
                continue
            parts = raw.split()
            if len(parts) != 3:
                _fail(path, lineno + 1, "coordinate entry needs 'row col value'")
            try:
                row, col, val = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                _fail(path, lineno + 1, f"cannot parse entry {raw!r}")
            if not (1 <= row <= m and 1 <= col <= n):
                _fail(path, lineno + 1, f"index ({row}, {col}) outside {m}x{n}")
            X[row - 1, col - 1] = val
            if symmetry == "symmetric" and row != col:
                X[col - 1, row - 1] = val
            count += 1
        if count != nnz:
            _fail(path, len(lines), f"header declares {nnz} entries, found {count}")
    else:
        vals = []
        for lineno in range(i + 1, len(lines)):
            raw = lines[lineno].strip()
            if not raw or raw.startswith("%"):
                continue
            try:
                vals.append(float(raw.split()[0]))
            except ValueError:
                _fail(path, lineno + 1, f"cannot parse value {raw!r}")
        if symmetry == "symmetric":
            want_vals = n * (n + 1) // 2 if m == n else -1
            if len(vals) != want_vals:
                _fail(path, len(lines), f"expected {want_vals} values, found {len(vals)}")
            k = 0
            for j in range(n):
                for r in range(j, m):
                    X[r, j] = vals[k]
                    X[j, r] = vals[k]
                    k += 1
        else:
            if len(vals) != m * n:
                _fail(path, len(lines), f"expected {m * n} values, found {len(vals)}")
            X = np.array(vals).reshape((n, m)).T  # column-major storage
    return X


def save_matrix_market(path: str, X: np.ndarray, fmt: str = "coordinate") -> None:
    """Write a dense matrix in the exchange format (always 'general')."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("only matrices can be written")
    m, n = X.shape
    with open(path, "w") as fh:
        if fmt == "coordinate":
            rows, cols = np.nonzero(X)
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            fh.write(f"{m} {n} {len(rows)}\n")
            for r, c in zip(rows, cols):
                fh.write(f"{r + 1} {c + 1} {X[r, c]:.17g}\n")
        elif fmt == "array":
            fh.write("%%MatrixMarket matrix array real general\n")
            fh.write(f"{m} {n}\n")
            for j in range(n):
                for r in range(m):
                    fh.write(f"{X[r, j]:.17g}\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")


def dump_factors(Y: LowRankMatrix, directory: str, prefix: str = "factor") -> list[str]:
    """Debug dump of the three factors as dense array-format files."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for name, X in (("U", Y.U), ("S", Y.S), ("V", Y.V)):
        p = os.path.join(directory, f"{prefix}_{name}.mtx")
        save_matrix_market(p, X, fmt="array")
        paths.append(p)
    return paths
