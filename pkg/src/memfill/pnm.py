"""Binary PGM (P5) and PPM (P6) readers/writers.

These two formats cover every image artifact the CLI emits: grayscale
label/mask planes and RGB renderings. No external codec is involved, so
outputs are bit-exact and diffable.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, FormatError


def _read_header(raw: bytes, magic: bytes):
    if raw[:2] != magic:
        raise FormatError(f"bad magic {raw[:2]!r}, expected {magic!r}", offset=0)
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(raw):
            raise FormatError("truncated header", offset=pos)
        ch = raw[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(raw) and raw[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(raw[start:pos]))
        else:
            raise FormatError(f"unexpected header byte {ch!r}", offset=pos)
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after maxval", offset=pos)
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}", offset=2)
    if not 0 < maxval < 256:
        raise FormatError(f"unsupported maxval {maxval}", offset=2)
    return width, height, maxval, pos + 1


def write_pgm(path, gray: np.ndarray, maxval: int = 255) -> None:
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ContractViolationError("PGM payload must be 2-d")
    if gray.min() < 0 or gray.max() > maxval:
        raise ContractViolationError(f"PGM values outside [0, {maxval}]")
    header = f"P5\n{gray.shape[1]} {gray.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(gray.astype(np.uint8).tobytes())


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Return (2-d uint8 array, maxval)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    width, height, maxval, offset = _read_header(raw, b"P5")
    expected = offset + width * height
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch: file has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    arr = np.frombuffer(raw, dtype=np.uint8, offset=offset).reshape(height, width)
    return arr.copy(), maxval


def write_ppm(path, image: np.ndarray) -> None:
    """Write a (3, h, w) float image in [0, 1] as binary PPM."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[0] != 3:
        raise ContractViolationError("PPM payload must be (3, h, w)")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ContractViolationError("PPM values must lie in [0, 1]")
    quantized = np.rint(image.astype(np.float64) * 255.0).astype(np.uint8)
    header = f"P6\n{image.shape[2]} {image.shape[1]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.transpose(1, 2, 0).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM into a (3, h, w) float32 image in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    width, height, maxval, offset = _read_header(raw, b"P6")
    expected = offset + 3 * width * height
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch: file has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    arr = np.frombuffer(raw, dtype=np.uint8, offset=offset).reshape(height, width, 3)
    return (arr.transpose(2, 0, 1).astype(np.float32)) / float(maxval)
