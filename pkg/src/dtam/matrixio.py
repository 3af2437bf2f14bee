"""Matrix/vector file formats.

Text: an optional header line ``# rows=<m> cols=<n>`` followed by one
comma-separated row per matrix row.

Binary: two little-endian uint64 (rows, cols) followed by rows*cols
little-endian float64 values in column-major order.

Vectors are stored as ``cols=1`` matrices in either format.
"""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .core import as_matrix

_HEADER = re.compile(r"#\s*rows\s*=\s*(\d+)\s+cols\s*=\s*(\d+)")


class MatrixFormatError(ValueError):
    pass


def _is_binary(path: Path) -> bool:
    return path.suffix.lower() in (".bin", ".f64", ".raw")


def write_matrix(path, A) -> None:
    path = Path(path)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    if A.ndim != 2:
        raise MatrixFormatError("only 1-D or 2-D arrays can be written")
    m, n = A.shape
    if _is_binary(path):
        header = np.array([m, n], dtype="<u8").tobytes()
        body = np.asarray(A, dtype="<f8").ravel(order="F").tobytes()
        path.write_bytes(header + body)
        return
    lines = [f"# rows={m} cols={n}"]
    lines += [",".join(repr(float(v)) for v in row) for row in A]
    path.write_text("\n".join(lines) + "\n")


def write_vector(path, v) -> None:
    write_matrix(path, np.asarray(v, dtype=np.float64).reshape(-1, 1))


def read_matrix(path) -> np.ndarray:
    try:
        return _read_matrix(Path(path))
    except MatrixFormatError:
        raise
    except ValueError as exc:
        raise MatrixFormatError(f"{path}: {exc}") from None


def _read_matrix(path: Path) -> np.ndarray:
    if _is_binary(path):
        raw = path.read_bytes()
        if len(raw) < 16:
            raise MatrixFormatError(f"{path}: truncated header")
        m, n = (int(v) for v in np.frombuffer(raw[:16], dtype="<u8"))
        expected = 16 + 8 * m * n
        if len(raw) != expected:
            raise MatrixFormatError(
                f"{path}: expected {expected} bytes for {m}x{n}, found {len(raw)}"
            )
        data = np.frombuffer(raw[16:], dtype="<f8").astype(np.float64)
        return as_matrix(data.reshape((m, n), order="F"))

    rows, dims = [], None
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            match = _HEADER.match(line)
            if match:
                dims = (int(match.group(1)), int(match.group(2)))
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise MatrixFormatError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise MatrixFormatError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise MatrixFormatError(f"{path}: ragged rows")
    A = np.array(rows, dtype=np.float64)
    if dims is not None and A.shape != dims:
        raise MatrixFormatError(f"{path}: header says {dims}, data is {A.shape}")
    return as_matrix(A)


def read_vector(path) -> np.ndarray:
    A = read_matrix(path)
    if A.shape[1] != 1 and A.shape[0] != 1:
        raise MatrixFormatError(f"{path}: expected a single row or column, got {A.shape}")
    return np.array(A.ravel(order="F"))
