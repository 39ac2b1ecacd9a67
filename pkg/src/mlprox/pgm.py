"""Binary PGM (P5) image I/O, 8- and 16-bit, mapped linearly to [0, 1]."""

from __future__ import annotations

import numpy as np


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM file into a float64 array scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary (P5) PGM file")

    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval

    width, height, maxval = (int(t) for t in tokens)
    if not 0 < maxval < 65536:
        raise ValueError(f"{path}: bad maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.uint8
    count = width * height
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if raw.size != count:
        raise ValueError(f"{path}: truncated pixel data")
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write a float array (clipped to [0, 1]) as binary PGM."""
    if maxval not in (255, 65535):
        raise ValueError("maxval must be 255 or 65535")
    a = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    q = np.rint(a * maxval)
    pixels = q.astype(">u2" if maxval > 255 else np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode())
        fh.write(pixels.tobytes())
