"""Memory-dynamics simulation and the full forward pipeline.

One simulation step sweeps the corpus in sample order: for each sample it
pools the known-region latents V and the coarse-image latents Q, applies
one memory update, reads the memory back, and records the mean retrieval
distance between the readout and V over valid rows. The coarse stage is
out of scope here, so the simulation queries with the ground-truth image
(the best-case coarse output) while the pipeline queries with a
known-pixel mean fill that never looks inside the corrupted region; both
accept optional seeded Gaussian query degradation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractViolationError
from .losses import (
    FeatureExtractor,
    LossReport,
    LossWeights,
    RegionEncoder,
    SeededCritic,
    total_loss,
)
from .masks import band_for_coverage, coverage_fraction
from .metrics import l1_metric, psnr, ssim
from .patch_correlation import CorrelationConfig, fuse_and_enhance
from .regions import region_avg_pool
from .slot_memory import MemoryState, read_memory, update_memory
from .synthetic import SyntheticSample
from .tensor import STORAGE_DTYPE

DEGRADED_Q_SIGMA = 0.1


@dataclass
class SimReport:
    """Trace of one memory simulation. runtime_seconds is volatile and is
    excluded from serialized reports so report bytes stay reproducible."""

    step_errors: list[float]
    band_stats: dict[str, dict[str, float]]
    samples: int
    steps: int
    n: int
    m: int
    alpha: float
    runtime_seconds: float = field(default=0.0)

    @property
    def initial_error(self) -> Optional[float]:
        return self.step_errors[0] if self.step_errors else None

    @property
    def final_error(self) -> Optional[float]:
        return self.step_errors[-1] if self.step_errors else None

    def summary_dict(self) -> dict:
        ratio = None
        if self.step_errors and self.initial_error:
            ratio = self.final_error / self.initial_error
        return {
            "samples": self.samples,
            "steps": self.steps,
            "n": self.n,
            "m": self.m,
            "alpha": self.alpha,
            "initial_error": self.initial_error,
            "final_error": self.final_error,
            "ratio": ratio,
            "bands": self.band_stats,
        }


def _mask_band_label(mask) -> str:
    band = band_for_coverage(coverage_fraction(mask))
    return band[2] if band else "other"


def _degrade(image: np.ndarray, sigma: float, rng) -> np.ndarray:
    if sigma <= 0.0:
        return image
    noisy = image.astype(np.float64) + sigma * rng.standard_normal(image.shape)
    return noisy.astype(STORAGE_DTYPE)


def _retrieval_error(q_hat, v) -> Optional[float]:
    rows = v.valid
    if not rows.any():
        return None
    diff = q_hat.data[rows].astype(np.float64) - v.data[rows].astype(np.float64)
    return float(np.linalg.norm(diff, axis=1).mean())


def run_memory_sim(
    corpus: list[SyntheticSample],
    mem: MemoryState,
    steps: int,
    *,
    query_sigma: float = 0.0,
    noise_seed: int = 0,
) -> tuple[SimReport, MemoryState]:
    """Drive update/read cycles over the corpus; returns (report, final state).

    Applies updates strictly in sample order within each step, so the run
    is a pure function of its arguments.
    """
    if not corpus:
        raise ContractViolationError("corpus must be nonempty")
    if steps < 0:
        raise ContractViolationError("steps must be nonnegative")
    started = time.perf_counter()
    noise_rng = np.random.default_rng(int(noise_seed))
    pooled = []
    for sample in corpus:
        coarse = _degrade(sample.image, query_sigma, noise_rng)
        q = region_avg_pool(coarse, sample.semantic)
        v = region_avg_pool(sample.image, sample.semantic, sample.mask)
        pooled.append((q, v, _mask_band_label(sample.mask)))

    step_errors: list[float] = []
    last_sample_errors: list[Optional[float]] = [None] * len(corpus)
    for _step in range(steps):
        errors = []
        for idx, (q, v, _band) in enumerate(pooled):
            mem = update_memory(mem, q, v)
            read = read_memory(mem, q)
            err = _retrieval_error(read.q_hat, v)
            last_sample_errors[idx] = err
            if err is not None:
                errors.append(err)
        step_errors.append(float(np.mean(errors)) if errors else 0.0)

    band_stats: dict[str, dict[str, float]] = {}
    for (q, v, band), err in zip(pooled, last_sample_errors):
        entry = band_stats.setdefault(band, {"count": 0, "mean_error": 0.0})
        if err is not None:
            entry["mean_error"] += err
            entry["count"] += 1
    for entry in band_stats.values():
        if entry["count"]:
            entry["mean_error"] /= entry["count"]

    report = SimReport(
        step_errors=step_errors,
        band_stats=band_stats,
        samples=len(corpus),
        steps=steps,
        n=mem.n,
        m=mem.m,
        alpha=mem.alpha,
        runtime_seconds=time.perf_counter() - started,
    )
    return report, mem


def fill_unknown(image, mask) -> np.ndarray:
    """Replace corrupted pixels with the per-channel mean of known pixels.

    A structure-free coarse substitute: it uses nothing from inside the
    corrupted region. With no known pixels the fill value is 0.5.
    """
    image = np.asarray(image, dtype=STORAGE_DTYPE)
    known = np.asarray(mask).astype(bool)
    out = image.astype(np.float64).copy()
    for ch in range(image.shape[0]):
        fill = image[ch][known].mean(dtype=np.float64) if known.any() else 0.5
        out[ch][~known] = fill
    return out.astype(STORAGE_DTYPE)


@dataclass(frozen=True)
class PipelineResult:
    features: np.ndarray  # fused+enhanced feature map
    completed: np.ndarray  # features clipped to [0, 1], the completed image
    losses: LossReport
    metrics: dict[str, float]


def run_pipeline(
    sample: SyntheticSample,
    mem: MemoryState,
    corr_cfg: CorrelationConfig,
    weights: LossWeights,
    *,
    encoder: RegionEncoder,
    extractor: FeatureExtractor,
    critic: Optional[SeededCritic] = None,
    query_sigma: float = 0.0,
    noise_seed: int = 0,
) -> PipelineResult:
    """Pool -> memory read -> fuse/enhance -> losses and metrics vs ground truth.

    The semantic term is skipped (parsing is external), and the
    adversarial term is skipped when no critic is supplied.
    """
    coarse = fill_unknown(sample.image, sample.mask)
    coarse = _degrade(coarse, query_sigma, np.random.default_rng(int(noise_seed)))
    q = region_avg_pool(coarse, sample.semantic)
    v = region_avg_pool(sample.image, sample.semantic, sample.mask)
    read = read_memory(mem, q)
    features = fuse_and_enhance(read.q_hat, v, sample.semantic, sample.mask, corr_cfg)
    completed = np.clip(features, 0.0, 1.0).astype(STORAGE_DTYPE)

    adjusted = {**weights.as_dict(), "semantic": 0.0}
    d_real = d_fake = None
    if critic is not None and weights.adv > 0:
        d_real = critic.score(sample.image)
        d_fake = critic.score(completed)
    else:
        adjusted["adv"] = 0.0
    losses = total_loss(
        completed,
        sample.image,
        sample.mask,
        LossWeights(**adjusted),
        encoder=encoder,
        extractor=extractor,
        d_real=d_real,
        d_fake=d_fake,
    )
    sample_metrics = {
        "l1": l1_metric(completed, sample.image),
        "psnr": psnr(completed, sample.image),
        "ssim": ssim(completed, sample.image),
    }
    return PipelineResult(features, completed, losses, sample_metrics)
