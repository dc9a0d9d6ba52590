"""Minimal RGB8 image reading and writing.

PPM (P6) is parsed natively so tests and the synthetic generator have a
zero-dependency raster format; PNG goes through Pillow. Everything is
returned as (height, width, 3) uint8 arrays, grayscale sources expanded
to three equal channels.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import DecodeError


def read_image(source) -> np.ndarray:
    """Decode a PPM or PNG image to an RGB8 array."""
    data = _as_bytes(source)
    if data[:2] == b"P6":
        return _decode_ppm(data)
    try:
        from PIL import Image

        with Image.open(io.BytesIO(data)) as img:
            img = img.convert("RGB")
            arr = np.asarray(img, dtype=np.uint8)
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    return arr


def write_ppm(path, pixels: np.ndarray) -> None:
    """Write an RGB8 array as binary PPM (P6, maxval 255)."""
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("expected (h, w, 3) RGB8 array")
    h, w = arr.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes())


def write_png(path, pixels: np.ndarray) -> None:
    from PIL import Image

    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    Image.fromarray(arr, mode="RGB").save(str(path), format="PNG")


def _decode_ppm(data: bytes) -> np.ndarray:
    # Header tokens may be separated by any whitespace and '#' comments.
    pos = 0
    tokens: list[bytes] = []
    while len(tokens) < 4:
        if pos >= len(data):
            raise DecodeError("truncated PPM header")
        c = data[pos : pos + 1]
        if c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise DecodeError("truncated PPM comment")
            pos = nl + 1
        elif c.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace after maxval, then raw pixel bytes
    if tokens[0] != b"P6":
        raise DecodeError(f"not a P6 PPM: magic {tokens[0]!r}")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise DecodeError("non-numeric PPM header field") from exc
    if maxval != 255:
        raise DecodeError(f"unsupported PPM maxval {maxval}")
    expected = width * height * 3
    raw = data[pos : pos + expected]
    if len(raw) < expected:
        raise DecodeError("truncated PPM pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def _as_bytes(source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        try:
            return Path(source).read_bytes()
        except OSError as exc:
            raise DecodeError(f"cannot read {source}: {exc}") from exc
    return source.read()
