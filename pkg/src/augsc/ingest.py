"""Readers and writers for matrices, label vectors and image collections.

CSV files hold one sample per row (the usual convention); they are
transposed on load so that samples become columns. The binary ``.ascm``
layout is::

    b"ASCM" | u32 version (=1) | u64 rows | u64 cols | rows*cols float64

all little-endian, values in column-major order, read directly as a
``rows x cols`` (d x n) matrix.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .augment import ImageGeometry
from .core import DataMatrix
from .errors import DataError, MagicMismatch, NonFinite, ParseError, Truncated

BIN_MAGIC = b"ASCM"
BIN_VERSION = 1
_BIN_HEADER = struct.Struct("<4sIQQ")
IDX_IMAGES = 0x00000803


def _fmt(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".csv":
        return "CSV"
    if ext in (".bin", ".ascm"):
        return "BIN"
    raise DataError(f"cannot infer matrix format from {path.name}")


def load_matrix(path, format: str | None = None) -> DataMatrix:
    """Read a d x n data matrix from CSV (rows are samples) or BIN."""
    path = Path(path)
    fmt = (format or _fmt(path)).upper()
    if fmt == "CSV":
        return DataMatrix(_read_csv(path).T)
    if fmt == "BIN":
        return DataMatrix(_read_bin(path))
    raise DataError(f"unknown matrix format {format!r}")


def _read_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                vals = [float(tok) for tok in s.split(",")]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"{path}:{lineno}: expected {width} fields, got {len(vals)}")
            bad = [k for k, v in enumerate(vals) if not np.isfinite(v)]
            if bad:
                raise NonFinite(f"{path}:{lineno}: non-finite entry in field {bad[0] + 1}")
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _read_bin(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _BIN_HEADER.size:
        raise Truncated(f"{path}: header needs {_BIN_HEADER.size} bytes, file has {len(raw)}")
    magic, version, rows, cols = _BIN_HEADER.unpack_from(raw)
    if magic != BIN_MAGIC:
        raise MagicMismatch(f"{path}: magic {magic!r}, expected {BIN_MAGIC!r}")
    if version != BIN_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    need = rows * cols * 8
    body = raw[_BIN_HEADER.size :]
    if len(body) < need:
        raise Truncated(f"{path}: payload needs {need} bytes at offset {_BIN_HEADER.size}, has {len(body)}")
    if len(body) > need:
        raise ParseError(f"{path}: {len(body) - need} trailing bytes at offset {_BIN_HEADER.size + need}")
    vals = np.frombuffer(body, dtype="<f8").reshape((rows, cols), order="F")
    if not np.all(np.isfinite(vals)):
        k = int(np.flatnonzero(~np.isfinite(vals.ravel(order="F")))[0])
        raise NonFinite(f"{path}: non-finite entry at offset {_BIN_HEADER.size + 8 * k}")
    return vals.astype(float)


def save_matrix(path, x, format: str | None = None) -> None:
    """Write a d x n matrix; CSV uses 17 significant digits."""
    path = Path(path)
    vals = np.asarray(x.values if isinstance(x, DataMatrix) else x, dtype=float)
    fmt = (format or _fmt(path)).upper()
    if fmt == "CSV":
        np.savetxt(path, vals.T, delimiter=",", fmt="%.17g")
    elif fmt == "BIN":
        with open(path, "wb") as fh:
            fh.write(_BIN_HEADER.pack(BIN_MAGIC, BIN_VERSION, vals.shape[0], vals.shape[1]))
            fh.write(vals.astype("<f8").tobytes(order="F"))
    else:
        raise DataError(f"unknown matrix format {format!r}")


def load_labels(path, p: int | None = None) -> np.ndarray:
    """One integer per line, ``-1`` for an unlabeled sample."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                v = int(s)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: not an integer: {s!r}") from exc
            if v < -1 or (p is not None and v >= p):
                raise ParseError(f"{path}:{lineno}: OutOfRange label {v}")
            out.append(v)
    if not out:
        raise ParseError(f"{path}: no labels")
    return np.array(out, dtype=int)


def save_labels(path, labels) -> None:
    np.savetxt(Path(path), np.asarray(labels, dtype=int), fmt="%d")


def load_idx(path) -> tuple[DataMatrix, ImageGeometry]:
    """Read an IDX image file (big-endian, unsigned bytes) scaled to [0, 1]."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 16:
        raise Truncated(f"{path}: header needs 16 bytes, file has {len(raw)}")
    magic, count, rows, cols = struct.unpack_from(">IIII", raw)
    if magic != IDX_IMAGES:
        raise MagicMismatch(f"{path}: magic 0x{magic:08x}, expected 0x{IDX_IMAGES:08x}")
    need = count * rows * cols
    if len(raw) - 16 < need:
        raise Truncated(f"{path}: payload needs {need} bytes, has {len(raw) - 16}")
    pix = np.frombuffer(raw, dtype=np.uint8, count=need, offset=16).reshape(count, rows * cols)
    return DataMatrix(pix.T.astype(float) / 255.0), ImageGeometry(rows, cols)


def _read_pgm(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: incomplete header")
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"{path}: bad header field") from exc
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ParseError(f"{path}: invalid header values")
    pos += 1  # single whitespace after maxval
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    nbytes = width * height * np.dtype(dtype).itemsize
    if len(raw) - pos < nbytes:
        raise ParseError(f"{path}: pixel data truncated")
    img = np.frombuffer(raw, dtype=dtype, count=width * height, offset=pos).reshape(height, width)
    return img.astype(float) / maxval


def _resize(img: np.ndarray, h: int, w: int) -> np.ndarray:
    """Area-average when shrinking by an integer factor, bilinear otherwise."""
    hs, ws = img.shape
    if (hs, ws) == (h, w):
        return img
    if hs % h == 0 and ws % w == 0:
        return img.reshape(h, hs // h, w, ws // w).mean(axis=(1, 3))
    ys = np.clip((np.arange(h) + 0.5) * hs / h - 0.5, 0, hs - 1)
    xs = np.clip((np.arange(w) + 0.5) * ws / w - 0.5, 0, ws - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, hs - 1)
    x1 = np.minimum(x0 + 1, ws - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def load_pgm_dir(path, target_size: tuple[int, int]) -> tuple[DataMatrix, ImageGeometry]:
    """Load every ``*.pgm`` in a directory, in lexicographic order."""
    path = Path(path)
    h, w = target_size
    files = sorted(path.glob("*.pgm"))
    if not files:
        raise DataError(f"{path}: no .pgm files")
    cols = [_resize(_read_pgm(f), h, w).ravel() for f in files]
    return DataMatrix(np.column_stack(cols)), ImageGeometry(h, w)
