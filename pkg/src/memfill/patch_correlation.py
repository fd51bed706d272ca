"""Patch-correlation enhancement gated to corrupted regions.

Two per-channel projections produce independent representations of a
feature map; their unfolded patches score each other by dot product into
an N x N correlation matrix. Each patch is then rebuilt as the
correlation-weighted sum of all patches, folded back, and the result is
added to the input only where the mask marks pixels corrupted, so known
pixels pass through bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolationError
from .regions import LatentMatrix, SemanticMap, broadcast_latents, mask_fuse, validate_mask
from .tensor import STORAGE_DTYPE, as_matrix, as_tensor3, fold, row_softmax, unfold


@dataclass(frozen=True)
class CorrelationConfig:
    """Geometry and projections for patch-correlation enhancement.

    projection_a/b are (c, c) channel-mixing matrices applied per pixel;
    None means identity. normalize_scores row-softmaxes the correlation
    matrix so every rebuilt patch is a convex combination of patches.
    """

    patch_size: int = 3
    stride: int = 3
    projection_a: Optional[np.ndarray] = field(default=None)
    projection_b: Optional[np.ndarray] = field(default=None)
    normalize_scores: bool = True

    def __post_init__(self):
        if self.patch_size < 1 or self.stride < 1:
            raise ContractViolationError("patch_size and stride must be positive")


@dataclass(frozen=True)
class CorrelationMap:
    scores: np.ndarray  # (N, N)

    @property
    def n_patches(self) -> int:
        return self.scores.shape[0]


def _project(f: np.ndarray, proj: Optional[np.ndarray]) -> np.ndarray:
    if proj is None:
        return f
    proj = as_matrix(proj)
    c = f.shape[0]
    if proj.shape != (c, c):
        raise ContractViolationError(
            f"projection shape {proj.shape} does not match channel count {c}"
        )
    mixed = np.einsum("dc,chw->dhw", proj.astype(np.float64), f.astype(np.float64))
    return mixed.astype(STORAGE_DTYPE)


def patch_similarity(f, cfg: CorrelationConfig) -> CorrelationMap:
    """Pairwise dot products between projected, unfolded patches."""
    f = as_tensor3(f)
    a = unfold(_project(f, cfg.projection_a), cfg.patch_size, cfg.stride).flattened()
    b = unfold(_project(f, cfg.projection_b), cfg.patch_size, cfg.stride).flattened()
    raw = np.einsum("pk,qk->pq", a.astype(np.float64), b.astype(np.float64))
    scores = raw.astype(STORAGE_DTYPE)
    if cfg.normalize_scores:
        scores = row_softmax(scores)
    return CorrelationMap(scores)


def enhance_masked_regions(f, mask, cfg: CorrelationConfig) -> np.ndarray:
    """Rebuild patches by correlation, gate to corrupted pixels, add residually.

    Output equals f exactly wherever mask == 1.
    """
    f = as_tensor3(f)
    mask = validate_mask(mask, f.shape[1], f.shape[2])
    corr = patch_similarity(f, cfg)
    patches = unfold(f, cfg.patch_size, cfg.stride)
    flat = patches.flattened().astype(np.float64)
    updated = corr.scores.astype(np.float64) @ flat
    rebuilt = type(patches)(
        updated.reshape(patches.data.shape).astype(STORAGE_DTYPE),
        patches.patch,
        patches.stride,
        patches.src_height,
        patches.src_width,
    )
    enhanced = fold(rebuilt).astype(np.float64)
    gate = (1.0 - mask.astype(np.float64))[None, :, :]
    out = f.astype(np.float64) + gate * enhanced
    return out.astype(STORAGE_DTYPE)


def fuse_and_enhance(
    q_hat: LatentMatrix,
    v: LatentMatrix,
    s: SemanticMap,
    mask,
    cfg: CorrelationConfig,
) -> np.ndarray:
    """Full region-enhancement forward pass.

    Broadcasts memory readouts and observed latents over the semantic map,
    fuses them by mask (known pixels take the observed branch), then runs
    the gated patch-correlation enhancement.
    """
    f_mem = broadcast_latents(q_hat, s)
    f_v = broadcast_latents(v, s)
    fused = mask_fuse(f_mem, f_v, mask)
    return enhance_masked_regions(fused, mask, cfg)
