"""Readers and writers for TNSR, PGM (P5) and PFM files.

TNSR layout: ``b"TNSR"``, little-endian u32 version (1), u32 rank, ``rank``
u32 dims, then row-major little-endian float32 values.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError

TNSR_MAGIC = b"TNSR"
TNSR_VERSION = 1


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def _write_bytes(path, data: bytes) -> None:
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(data)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def encode_tnsr(array) -> bytes:
    a = np.ascontiguousarray(array, dtype="<f4")
    head = TNSR_MAGIC + struct.pack("<II", TNSR_VERSION, a.ndim)
    head += struct.pack(f"<{a.ndim}I", *a.shape)
    return head + a.tobytes()


def decode_tnsr(data: bytes) -> np.ndarray:
    if len(data) < 12 or data[:4] != TNSR_MAGIC:
        raise FormatError("not a TNSR file")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != TNSR_VERSION:
        raise FormatError(f"unsupported TNSR version {version}")
    off = 12 + 4 * rank
    if len(data) < off:
        raise FormatError("truncated TNSR header")
    dims = struct.unpack_from(f"<{rank}I", data, 12)
    n = int(np.prod(dims, dtype=np.int64))
    if len(data) != off + 4 * n:
        raise FormatError(f"TNSR payload has {len(data) - off} bytes, expected {4 * n}")
    return np.frombuffer(data, dtype="<f4", offset=off).reshape(dims).astype(np.float32)


def write_tnsr(path, array) -> None:
    _write_bytes(path, encode_tnsr(array))


def read_tnsr(path) -> np.ndarray:
    return decode_tnsr(_read_bytes(path))


def _header_tokens(data: bytes, count: int):
    """Pull ``count`` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i >= len(data):
            raise FormatError("truncated header")
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    # exactly one whitespace byte separates the header from the raster
    return tokens, i + 1


def encode_pgm(image) -> bytes:
    a = np.asarray(image)
    if a.ndim != 2:
        raise FormatError(f"PGM needs a 2-D image, got {a.shape}")
    if a.dtype != np.uint8:
        if a.min() < 0 or a.max() > 255:
            raise FormatError("PGM values must lie in [0, 255]")
        a = a.astype(np.uint8)
    h, w = a.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(a).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    tokens, off = _header_tokens(data, 4)
    if tokens[0] != b"P5":
        raise FormatError("not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if len(data) - off != w * h:
        raise FormatError("PGM raster size does not match header")
    return np.frombuffer(data, dtype=np.uint8, offset=off).reshape(h, w).copy()


def write_pgm(path, image) -> None:
    _write_bytes(path, encode_pgm(image))


def read_pgm(path) -> np.ndarray:
    return decode_pgm(_read_bytes(path))


def to_gray8(values) -> np.ndarray:
    """Map [0, 1] floats to 8-bit gray with rounding."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def read_mask(path) -> np.ndarray:
    """Binary mask from a PGM: pixels >= 128 are set."""
    return read_pgm(path) >= 128


def write_mask(path, mask) -> None:
    write_pgm(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def encode_pfm(image) -> bytes:
    a = np.asarray(image, dtype="<f4")
    if a.ndim != 2:
        raise FormatError(f"PFM writer handles single-channel maps only, got {a.shape}")
    h, w = a.shape
    # PFM stores rows bottom to top; negative scale means little-endian
    body = np.ascontiguousarray(a[::-1]).tobytes()
    return f"Pf\n{w} {h}\n-1.0\n".encode("ascii") + body


def decode_pfm(data: bytes) -> np.ndarray:
    tokens, off = _header_tokens(data, 4)
    if tokens[0] not in (b"Pf", b"PF"):
        raise FormatError("not a PFM file")
    channels = 1 if tokens[0] == b"Pf" else 3
    w, h = int(tokens[1]), int(tokens[2])
    scale = float(tokens[3])
    dt = "<f4" if scale < 0 else ">f4"
    n = w * h * channels
    if len(data) - off != 4 * n:
        raise FormatError("PFM raster size does not match header")
    a = np.frombuffer(data, dtype=dt, offset=off).astype(np.float32)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return a.reshape(shape)[::-1].copy()


def write_pfm(path, image) -> None:
    _write_bytes(path, encode_pfm(image))


def read_pfm(path) -> np.ndarray:
    return decode_pfm(_read_bytes(path))


def read_map(path) -> np.ndarray:
    """Load a 2-D float map from PFM, PGM (scaled to [0, 1]) or TNSR."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pfm":
        return read_pfm(path)
    if suffix == ".pgm":
        return read_pgm(path).astype(np.float32) / 255.0
    a = read_tnsr(path)
    if a.ndim != 2:
        raise FormatError(f"{path}: expected a rank-2 tensor, got rank {a.ndim}")
    return a


def write_jsonl(path, records) -> None:
    lines = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    _write_bytes(path, lines.encode("utf-8"))


def read_jsonl(path) -> list:
    text = _read_bytes(path).decode("utf-8")
    return [json.loads(line) for line in text.splitlines() if line.strip()]
