"""Binary PGM (P5, 8-bit) reading and writing."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Union

import numpy as np

_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


class PGMError(ValueError):
    pass


def encode_pgm(img: np.ndarray) -> bytes:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise PGMError("PGM export needs a 2-D uint8 array")
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(arr).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    m = _HEADER.match(data)
    if m is None:
        raise PGMError("not a binary (P5) PGM")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise PGMError(f"unsupported maxval {maxval}")
    body = data[m.end():]
    if len(body) != w * h:
        raise PGMError(f"pixel data has {len(body)} bytes, expected {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def write_pgm(path: Union[str, Path], img: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(img))


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        return decode_pgm(path.read_bytes())
    except PGMError as exc:
        raise PGMError(f"{path}: {exc}") from None
