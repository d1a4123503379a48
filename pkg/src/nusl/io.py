"""Matrix and vector files.

Two formats are understood:

* CSV, one matrix row per line, with an optional non-numeric header line.
* A binary blob: 16-byte header (magic ``b"NUSL"``, u32 ``d``, u32 ``K``,
  4 reserved bytes, all little-endian) followed by ``d*K`` little-endian
  float64 values in column-major order.
"""

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"NUSL"
_HEADER = struct.Struct("<4sII4x")
BINARY_SUFFIXES = {".nusl", ".bin"}


class FormatError(ValueError):
    pass


def _is_binary(path):
    path = Path(path)
    if path.suffix.lower() in BINARY_SUFFIXES:
        return True
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def read_csv_matrix(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: empty file")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: header only")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_binary_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, d, K = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * d * K:
        raise FormatError(f"{path}: expected {d * K} values, found {len(body) // 8}")
    return np.frombuffer(body, dtype="<f8").reshape((d, K), order="F").copy()


def read_matrix(path) -> np.ndarray:
    """Read a matrix from CSV or the binary blob format (sniffed)."""
    if _is_binary(path):
        return read_binary_matrix(path)
    return read_csv_matrix(path)


def read_vector(path) -> np.ndarray:
    m = read_matrix(path)
    if min(m.shape) != 1:
        raise FormatError(f"{path}: expected a vector, got shape {m.shape}")
    return m.ravel()


def binary_bytes(m) -> bytes:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    d, K = m.shape
    return _HEADER.pack(MAGIC, d, K) + np.asarray(m, dtype="<f8").tobytes(order="F")


def csv_text(m) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in m:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def atomic_write(path, data) -> Path:
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_matrix(path, m) -> Path:
    if Path(path).suffix.lower() in BINARY_SUFFIXES:
        return atomic_write(path, binary_bytes(m))
    return atomic_write(path, csv_text(m))


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
