"""Binary PGM (P5) and PPM (P6) readers/writers, 8-bit maxval 255 only."""

from __future__ import annotations

import numpy as np


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError("truncated netpbm header")
    return data[start:pos], pos


def read_pnm(path) -> np.ndarray:
    """Read a binary PGM/PPM; returns (h, w) uint8 or (3, h, w) uint8 planes."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported netpbm magic {magic!r} (need binary P5/P6)")
    width, pos = _read_token(data, pos)
    height, pos = _read_token(data, pos)
    maxval, pos = _read_token(data, pos)
    w, h, mv = int(width), int(height), int(maxval)
    if mv != 255:
        raise ValueError(f"only maxval 255 supported, got {mv}")
    pos += 1  # single whitespace byte after maxval
    channels = 1 if magic == b"P5" else 3
    need = w * h * channels
    raster = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    if raster.shape[0] != need:
        raise ValueError("truncated raster data")
    if channels == 1:
        return raster.reshape(h, w).copy()
    return raster.reshape(h, w, 3).transpose(2, 0, 1).copy()


def write_pgm(path, gray: np.ndarray) -> None:
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(gray.tobytes())


def write_ppm(path, rgb: np.ndarray) -> None:
    """rgb: (3, h, w) uint8 planes."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    _, h, w = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.transpose(1, 2, 0).tobytes())
