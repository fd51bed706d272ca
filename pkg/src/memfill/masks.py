"""Irregular brush-stroke mask generation.

Masks are grouped into the three corrupted-area bands used for evaluation:
1-20%, 20-40% and 40-60%. A mask is built by stamping thick random-walk
strokes (corrupted pixels set to 0) and stops as soon as the corrupted
fraction enters the band containing the requested coverage target. Up to
MAX_ATTEMPTS fresh canvases are tried before giving up.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError, DiagnosticError

# (low, high, label) with low exclusive on the first band's 1% floor.
MASK_BANDS = (
    (0.01, 0.20, "1-20%"),
    (0.20, 0.40, "20-40%"),
    (0.40, 0.60, "40-60%"),
)

MAX_ATTEMPTS = 100
MAX_STROKES = 8


def band_for_coverage(fraction: float):
    """Return the (low, high, label) band containing the fraction, or None."""
    for lo, hi, label in MASK_BANDS:
        if lo <= fraction <= hi:
            return (lo, hi, label)
    return None


def coverage_fraction(mask) -> float:
    """Corrupted (zero) fraction of a mask."""
    mask = np.asarray(mask)
    return float(1.0 - mask.mean(dtype=np.float64))


def _stamp_segment(corrupted, start, angle, length, radius, yy, xx):
    h, w = corrupted.shape
    end_y = min(max(start[0] + length * np.sin(angle), 0.0), h - 1.0)
    end_x = min(max(start[1] + length * np.cos(angle), 0.0), w - 1.0)
    steps = max(int(np.hypot(end_y - start[0], end_x - start[1])), 1)
    for t in np.linspace(0.0, 1.0, steps + 1):
        cy = start[0] + t * (end_y - start[0])
        cx = start[1] + t * (end_x - start[1])
        corrupted |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2
    return end_y, end_x


def generate_irregular_mask(h: int, w: int, coverage_target: float, seed: int) -> np.ndarray:
    """Deterministic brush-stroke mask whose corrupted fraction hits the
    band containing coverage_target. Returns a {0,1} uint8 mask (1 = known).
    """
    if h < 1 or w < 1:
        raise ContractViolationError("mask dimensions must be positive")
    band = band_for_coverage(coverage_target)
    if band is None:
        raise ContractViolationError(
            f"coverage target {coverage_target} outside the supported bands "
            f"{[b[2] for b in MASK_BANDS]}"
        )
    lo, hi, _ = band
    rng = np.random.default_rng(int(seed))
    min_dim = min(h, w)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    total = float(h * w)

    for _ in range(MAX_ATTEMPTS):
        corrupted = np.zeros((h, w), dtype=bool)
        overshot = False
        for _stroke in range(MAX_STROKES):
            width = rng.uniform(0.05, 0.15) * min_dim
            radius = max(width / 2.0, 0.6)
            pos = (rng.uniform(0, h - 1), rng.uniform(0, w - 1))
            n_segments = int(rng.integers(8, 25))
            for _seg in range(n_segments):
                angle = rng.uniform(0.0, 2.0 * np.pi)
                length = rng.uniform(0.12, 0.30) * min_dim
                pos = _stamp_segment(corrupted, pos, angle, length, radius, yy, xx)
                frac = corrupted.sum() / total
                if lo <= frac <= hi:
                    return (~corrupted).astype(np.uint8)
                if frac > hi:
                    overshot = True
                    break
            if overshot:
                break
    raise DiagnosticError(
        f"could not reach coverage band [{lo}, {hi}] within {MAX_ATTEMPTS} attempts"
    )
