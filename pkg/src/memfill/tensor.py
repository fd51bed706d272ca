"""Minimal dense-array substrate.

Values are stored as float32; every reduction accumulates in float64 so
results are deterministic and do not depend on vector width. Feature maps
are (channels, height, width) arrays, matrices are (rows, cols).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, FormatError

STORAGE_DTYPE = np.float32

_MAGIC = b"MDT1"


def as_tensor3(data) -> np.ndarray:
    """Coerce to a finite float32 (channels, height, width) array."""
    arr = np.asarray(data, dtype=STORAGE_DTYPE)
    if arr.ndim != 3:
        raise ContractViolationError(f"expected 3-d array, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ContractViolationError("tensor dimensions must be positive")
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("tensor contains non-finite values")
    return arr


def as_matrix(data) -> np.ndarray:
    """Coerce to a finite float32 (rows, cols) array."""
    arr = np.asarray(data, dtype=STORAGE_DTYPE)
    if arr.ndim != 2:
        raise ContractViolationError(f"expected 2-d array, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ContractViolationError("matrix dimensions must be positive")
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("matrix contains non-finite values")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with row-major float64 accumulation."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ContractViolationError(
            f"matmul dimension mismatch: ({a.shape[0]}x{a.shape[1]}) x ({b.shape[0]}x{b.shape[1]})"
        )
    out = np.einsum("ik,kj->ij", a.astype(np.float64), b.astype(np.float64))
    return out.astype(STORAGE_DTYPE)


def row_softmax(m) -> np.ndarray:
    """Row-wise softmax with max-subtraction for overflow safety."""
    m = as_matrix(m).astype(np.float64)
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return out.astype(STORAGE_DTYPE)


@dataclass(frozen=True)
class PatchSet:
    """Patches lifted from a feature map, with the geometry to invert the lift.

    data is (count, channels, patch, patch); positions are enumerated
    row-major over the source grid.
    """

    data: np.ndarray
    patch: int
    stride: int
    src_height: int
    src_width: int

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def patch_channels(self) -> int:
        return self.data.shape[1]

    def flattened(self) -> np.ndarray:
        """(count, channels*patch*patch) view used for similarity scoring."""
        return self.data.reshape(self.count, -1)


def _grid_counts(h: int, w: int, patch: int, stride: int) -> tuple[int, int]:
    if patch < 1 or stride < 1:
        raise ContractViolationError("patch and stride must be positive")
    if patch > h or patch > w:
        raise ContractViolationError(f"patch {patch} exceeds spatial dims {h}x{w}")
    if stride > patch:
        # Gapped geometry would leave pixels uncovered and break the
        # fold(unfold(f)) == f round trip.
        raise ContractViolationError(f"stride {stride} exceeds patch {patch}")
    if (h - patch) % stride != 0 or (w - patch) % stride != 0:
        raise ContractViolationError(
            f"geometry {h}x{w} does not tile with patch={patch} stride={stride}"
        )
    return (h - patch) // stride + 1, (w - patch) // stride + 1


def unfold(f, patch: int, stride: int) -> PatchSet:
    """Extract all patch x patch blocks at the given stride, row-major."""
    f = as_tensor3(f)
    c, h, w = f.shape
    nh, nw = _grid_counts(h, w, patch, stride)
    windows = np.lib.stride_tricks.sliding_window_view(f, (patch, patch), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    data = windows.transpose(1, 2, 0, 3, 4).reshape(nh * nw, c, patch, patch)
    return PatchSet(np.ascontiguousarray(data, dtype=STORAGE_DTYPE), patch, stride, h, w)


def fold(p: PatchSet) -> np.ndarray:
    """Reassemble a PatchSet, averaging overlapping contributions per pixel."""
    nh, nw = _grid_counts(p.src_height, p.src_width, p.patch, p.stride)
    if p.data.ndim != 4 or p.data.shape[0] != nh * nw:
        raise ContractViolationError(
            f"patch count {p.data.shape[0]} inconsistent with origin geometry ({nh * nw} expected)"
        )
    if p.data.shape[2] != p.patch or p.data.shape[3] != p.patch:
        raise ContractViolationError("patch data shape inconsistent with declared patch size")
    c = p.data.shape[1]
    accum = np.zeros((c, p.src_height, p.src_width), dtype=np.float64)
    counts = np.zeros((p.src_height, p.src_width), dtype=np.float64)
    idx = 0
    for py in range(nh):
        y = py * p.stride
        for px in range(nw):
            x = px * p.stride
            accum[:, y : y + p.patch, x : x + p.patch] += p.data[idx]
            counts[y : y + p.patch, x : x + p.patch] += 1.0
            idx += 1
    return (accum / counts).astype(STORAGE_DTYPE)


def _write_array(path, dims: tuple[int, ...], arr: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        for d in dims:
            fh.write(struct.pack("<I", d))
        fh.write(arr.astype("<f4").tobytes())


def _read_array(path, ndim: int) -> tuple[tuple[int, ...], np.ndarray]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4 or raw[:4] != _MAGIC:
        raise FormatError(f"bad magic {raw[:4]!r}, expected {_MAGIC!r}", offset=0)
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError("truncated header", offset=len(raw))
    dims = struct.unpack_from(f"<{ndim}I", raw, 4)
    if any(d == 0 for d in dims):
        raise FormatError(f"zero dimension in header {dims}", offset=4)
    expected = header_end + 4 * int(np.prod(dims))
    if len(raw) != expected:
        raise FormatError(
            f"payload length mismatch: file has {len(raw)} bytes, expected {expected}",
            offset=min(len(raw), expected),
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=header_end)
    return dims, flat.reshape(dims).astype(STORAGE_DTYPE)


def save_tensor3(path, f) -> None:
    f = as_tensor3(f)
    _write_array(path, f.shape, f)


def load_tensor3(path) -> np.ndarray:
    _, arr = _read_array(path, 3)
    return arr


def save_matrix(path, m) -> None:
    m = as_matrix(m)
    _write_array(path, m.shape, m)


def load_matrix(path) -> np.ndarray:
    _, arr = _read_array(path, 2)
    return arr
