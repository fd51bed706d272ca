"""Synthetic corpus generation.

Each class keeps a consistent appearance across the corpus - a master
palette color and texture family drawn once per corpus - the property
that makes a per-semantic memory meaningful in the first place. A sample
is a fresh Voronoi partition of the frame rendered with per-class base
colors (jittered per sample) plus a seeded sinusoidal ripple, paired with
an irregular brush-stroke mask. Everything derives from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractViolationError, DiagnosticError
from .masks import MASK_BANDS, generate_irregular_mask
from .regions import SemanticMap
from .tensor import STORAGE_DTYPE

_LAYOUT_RETRIES = 20
_PALETTE_RETRIES = 50
_MIN_PALETTE_DIST = 0.25
_COLOR_JITTER = 0.05

# Default per-band targets cycled over samples when coverage is not pinned.
_BAND_CYCLE = tuple((lo + hi) / 2.0 for lo, hi, _ in MASK_BANDS)


@dataclass(frozen=True)
class SyntheticSample:
    image: np.ndarray  # (3, h, w) float32 in [0, 1]
    semantic: SemanticMap
    mask: np.ndarray  # (h, w) uint8, 1 = known
    seed: int


def _class_palette(rng, n_classes: int) -> np.ndarray:
    """Well-separated base colors so region latents stay distinguishable."""
    for _ in range(_PALETTE_RETRIES):
        palette = rng.uniform(0.20, 0.80, size=(n_classes, 3))
        dists = np.linalg.norm(palette[:, None, :] - palette[None, :, :], axis=2)
        dists[np.diag_indices(n_classes)] = np.inf
        if dists.min() >= _MIN_PALETTE_DIST:
            return palette
    return palette  # accept the last draw for very crowded palettes


def _voronoi_labels(rng, h: int, w: int, n_classes: int) -> np.ndarray:
    for _ in range(_LAYOUT_RETRIES):
        flat = rng.choice(h * w, size=n_classes, replace=False)
        cy, cx = np.divmod(flat, w)
        yy, xx = np.mgrid[0:h, 0:w]
        d2 = (yy[:, :, None] - cy) ** 2 + (xx[:, :, None] - cx) ** 2
        labels = d2.argmin(axis=2).astype(np.int32)
        if len(np.unique(labels)) == n_classes:
            return labels
    raise DiagnosticError(f"could not place {n_classes} classes in {h}x{w} after retries")


def _render(rng, labels: np.ndarray, palette: np.ndarray) -> np.ndarray:
    h, w = labels.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    image = np.zeros((3, h, w), dtype=np.float64)
    for i in range(palette.shape[0]):
        base = palette[i] + rng.uniform(-_COLOR_JITTER, _COLOR_JITTER, size=3)
        amp = rng.uniform(0.02, 0.10)
        freq_y = rng.uniform(0.2, 1.2)
        freq_x = rng.uniform(0.2, 1.2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        ripple = amp * np.sin(freq_y * yy + freq_x * xx + phase)
        sel = labels == i
        for ch in range(3):
            image[ch][sel] = base[ch] + ripple[sel]
    # base in [0.15, 0.85] and |ripple| <= 0.10 keep values inside [0.05, 0.95]
    return image.astype(STORAGE_DTYPE)


def gen_corpus(
    count: int,
    h: int,
    w: int,
    n_classes: int,
    seed: int,
    coverage: Optional[float] = None,
) -> list[SyntheticSample]:
    """Deterministic corpus; every class appears in every sample's map.

    coverage pins every mask to one band target; None cycles the three
    band midpoints across samples.
    """
    if n_classes < 2:
        raise ContractViolationError(f"need at least 2 classes, got {n_classes}")
    if count < 1:
        raise ContractViolationError("count must be positive")
    if h * w < n_classes:
        raise ContractViolationError(f"{h}x{w} frame cannot hold {n_classes} classes")
    master = np.random.default_rng(int(seed))
    palette = _class_palette(master, n_classes)
    samples = []
    for idx in range(count):
        sample_seed = int(master.integers(0, 2**32))
        rng = np.random.default_rng(sample_seed)
        labels = _voronoi_labels(rng, h, w, n_classes)
        image = _render(rng, labels, palette)
        target = coverage if coverage is not None else _BAND_CYCLE[idx % len(_BAND_CYCLE)]
        mask = generate_irregular_mask(h, w, target, sample_seed)
        samples.append(
            SyntheticSample(
                image=image,
                semantic=SemanticMap(labels, n_classes),
                mask=mask,
                seed=sample_seed,
            )
        )
    return samples
