"""Semantic label maps, binary masks, region pooling and mask-gated fusion.

Mask polarity is fixed package-wide: 1 marks a known (non-corrupted)
pixel, 0 marks a corrupted pixel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import pnm
from .errors import ContractViolationError, FormatError
from .tensor import STORAGE_DTYPE, as_tensor3


@dataclass(frozen=True)
class SemanticMap:
    """Integer label field with labels in [0, n)."""

    labels: np.ndarray
    n: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int32)
        if labels.ndim != 2 or labels.size == 0:
            raise ContractViolationError("semantic map must be a non-empty 2-d field")
        if self.n < 1:
            raise ContractViolationError(f"category count must be >= 1, got {self.n}")
        if labels.min() < 0 or labels.max() >= self.n:
            raise ContractViolationError(
                f"labels must lie in [0, {self.n}), found range "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class LatentMatrix:
    """One latent vector per semantic category, with per-row validity."""

    data: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=STORAGE_DTYPE)
        valid = np.asarray(self.valid, dtype=bool)
        if data.ndim != 2:
            raise ContractViolationError("latent data must be 2-d (n, c)")
        if valid.shape != (data.shape[0],):
            raise ContractViolationError("valid flags must have one entry per row")
        if np.any(data[~valid] != 0.0):
            raise ContractViolationError("rows flagged invalid must be all-zero")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valid", valid)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def c(self) -> int:
        return self.data.shape[1]


def validate_mask(mask, height: Optional[int] = None, width: Optional[int] = None) -> np.ndarray:
    """Check a {0,1} mask and return it as uint8."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ContractViolationError("mask must be a non-empty 2-d field")
    if not np.all(np.isin(mask, (0, 1))):
        raise ContractViolationError("mask values must be exactly 0 or 1")
    if height is not None and mask.shape != (height, width):
        raise ContractViolationError(
            f"mask shape {mask.shape} does not match expected ({height}, {width})"
        )
    return mask.astype(np.uint8)


def region_avg_pool(f, s: SemanticMap, region_mask=None) -> LatentMatrix:
    """Mean feature vector over each semantic region.

    Pools channel vectors of f over the pixels of each label (optionally
    intersected with region_mask == 1). A label with no selected pixels
    yields a zero row flagged invalid.
    """
    f = as_tensor3(f)
    c, h, w = f.shape
    if (h, w) != (s.height, s.width):
        raise ContractViolationError(
            f"feature spatial dims ({h}, {w}) do not match semantic map ({s.height}, {s.width})"
        )
    if region_mask is not None:
        region_mask = validate_mask(region_mask, h, w).astype(bool)
    data = np.zeros((s.n, c), dtype=STORAGE_DTYPE)
    valid = np.zeros(s.n, dtype=bool)
    for i in range(s.n):
        sel = s.labels == i
        if region_mask is not None:
            sel = sel & region_mask
        if not sel.any():
            continue
        data[i] = f[:, sel].mean(axis=1, dtype=np.float64).astype(STORAGE_DTYPE)
        valid[i] = True
    return LatentMatrix(data, valid)


def broadcast_latents(q: LatentMatrix, s: SemanticMap) -> np.ndarray:
    """Paint each pixel with the latent vector of its label."""
    if q.n < s.n or q.n <= int(s.labels.max()):
        raise ContractViolationError(
            f"latent matrix has {q.n} rows, semantic map needs at least {int(s.labels.max()) + 1}"
        )
    out = q.data[s.labels]  # (h, w, c)
    return np.ascontiguousarray(out.transpose(2, 0, 1), dtype=STORAGE_DTYPE)


def mask_fuse(f_mem, f_v, mask) -> np.ndarray:
    """Blend two feature maps by mask: known pixels from f_v, corrupted from f_mem."""
    f_mem = as_tensor3(f_mem)
    f_v = as_tensor3(f_v)
    if f_mem.shape != f_v.shape:
        raise ContractViolationError(f"feature shapes differ: {f_mem.shape} vs {f_v.shape}")
    mask = validate_mask(mask, f_mem.shape[1], f_mem.shape[2])
    m = mask.astype(np.float64)[None, :, :]
    fused = (1.0 - m) * f_mem.astype(np.float64) + m * f_v.astype(np.float64)
    return fused.astype(STORAGE_DTYPE)


def save_mask_pgm(path, mask) -> None:
    mask = validate_mask(mask)
    pnm.write_pgm(path, mask * np.uint8(255))


def load_mask_pgm(path) -> np.ndarray:
    gray, _ = pnm.read_pgm(path)
    if not np.all(np.isin(gray, (0, 255))):
        raise FormatError("mask PGM must contain only 0 and 255")
    return (gray == 255).astype(np.uint8)


def save_labels_pgm(path, s: SemanticMap) -> None:
    if s.n > 256:
        raise ContractViolationError("label PGM supports at most 256 categories")
    pnm.write_pgm(path, s.labels.astype(np.uint8), maxval=max(s.n - 1, 1))


def load_labels_pgm(path) -> SemanticMap:
    gray, maxval = pnm.read_pgm(path)
    return SemanticMap(gray.astype(np.int32), n=maxval + 1)
