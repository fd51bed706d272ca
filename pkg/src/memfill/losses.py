"""Objective function stack.

Seven terms: the paired intra/inter similarity losses over region
representations, semantic cross entropy, L1 reconstruction, perceptual
and Gram-style feature losses behind a pluggable extractor, the
adversarial formula over external critic scores, and anisotropic total
variation. Every L1-style norm is normalized to a mean so magnitudes are
size-independent; relative scale lives in the weights.

The region encoder and feature extractor are deterministic seeded
stand-ins; any object with the same ``encode``/``extract`` surface can be
plugged in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import ContractViolationError
from .regions import SemanticMap, validate_mask
from .tensor import STORAGE_DTYPE, as_tensor3


class RegionEncoder(Protocol):
    def encode(self, image, mask) -> tuple[np.ndarray, np.ndarray]:
        """Return (corrupted-region rows, known-region rows), both (r, d)."""
        ...


class FeatureExtractor(Protocol):
    def extract(self, image) -> list[np.ndarray]:
        """Return one (c_i, h_i, w_i) feature map per layer."""
        ...


class SeededRegionEncoder:
    """Linear channel mix followed by mean pooling over each mask side.

    Stands in for a pretrained reconstruction encoder: deterministic per
    seed, one row per region. An empty region pools to a zero row.
    """

    def __init__(self, in_channels: int = 3, out_channels: int = 8, seed: int = 0):
        rng = np.random.default_rng(int(seed))
        scale = 1.0 / np.sqrt(in_channels)
        self.weights = (rng.standard_normal((out_channels, in_channels)) * scale).astype(
            STORAGE_DTYPE
        )

    def encode(self, image, mask):
        image = as_tensor3(image)
        mask = validate_mask(mask, image.shape[1], image.shape[2]).astype(bool)
        feats = np.einsum(
            "dc,chw->dhw", self.weights.astype(np.float64), image.astype(np.float64)
        )
        rows = []
        for sel in (~mask, mask):
            if sel.any():
                rows.append(feats[:, sel].mean(axis=1))
            else:
                rows.append(np.zeros(feats.shape[0], dtype=np.float64))
        masked, unmasked = rows
        return masked[None, :], unmasked[None, :]


class IdentityExtractor:
    """Single layer returning the image itself."""

    def extract(self, image):
        return [as_tensor3(image)]


class SeededFeatureExtractor:
    """Random channel mixing + 2x2 mean pooling per layer."""

    def __init__(self, in_channels: int = 3, layer_channels: Sequence[int] = (6, 12), seed: int = 0):
        rng = np.random.default_rng(int(seed))
        self.weights = []
        prev = in_channels
        for out in layer_channels:
            scale = 1.0 / np.sqrt(prev)
            self.weights.append(
                (rng.standard_normal((out, prev)) * scale).astype(STORAGE_DTYPE)
            )
            prev = out

    @staticmethod
    def _pool2x2(f: np.ndarray) -> np.ndarray:
        c, h, w = f.shape
        if h < 2 or w < 2:
            return f
        h2, w2 = h // 2 * 2, w // 2 * 2
        f = f[:, :h2, :w2]
        return f.reshape(c, h2 // 2, 2, w2 // 2, 2).mean(axis=(2, 4))

    def extract(self, image):
        x = as_tensor3(image).astype(np.float64)
        layers = []
        for w in self.weights:
            x = np.einsum("dc,chw->dhw", w.astype(np.float64), x)
            x = self._pool2x2(x)
            layers.append(x.astype(STORAGE_DTYPE))
            x = x.astype(np.float64)
        return layers


class SeededCritic:
    """Patch-score stand-in for an external discriminator.

    Splits the image into non-overlapping 8x8 cells (one global cell if
    smaller), projects each cell's mean color through seeded weights and
    squashes to (0, 1).
    """

    def __init__(self, in_channels: int = 3, seed: int = 0, cell: int = 8):
        rng = np.random.default_rng(int(seed))
        self.weights = rng.standard_normal(in_channels)
        self.bias = float(rng.standard_normal())
        self.cell = cell

    def score(self, image) -> np.ndarray:
        image = as_tensor3(image).astype(np.float64)
        _, h, w = image.shape
        cell = min(self.cell, h, w)
        scores = []
        for y in range(0, h - cell + 1, cell):
            for x in range(0, w - cell + 1, cell):
                mu = image[:, y : y + cell, x : x + cell].mean(axis=(1, 2))
                scores.append(1.0 / (1.0 + np.exp(-(self.weights @ mu + self.bias))))
        return np.asarray(scores, dtype=np.float64)


def _mean_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def _as_image(data) -> np.ndarray:
    """Validate a (c, h, w) array without demoting float64 inputs.

    Losses are evaluated under finite-difference probes; a float32
    round-trip would swamp the perturbation.
    """
    arr = np.asarray(data)
    if arr.ndim != 3 or arr.size == 0:
        raise ContractViolationError(f"expected non-empty 3-d array, got shape {arr.shape}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("array contains non-finite values")
    return arr


def _check_pair(i_hat, i_gt):
    i_hat = _as_image(i_hat)
    i_gt = _as_image(i_gt)
    if i_hat.shape != i_gt.shape:
        raise ContractViolationError(f"image shapes differ: {i_hat.shape} vs {i_gt.shape}")
    return i_hat, i_gt


def intra_coord_loss(i_hat, i_gt, mask, enc: RegionEncoder) -> float:
    """Mean |difference| of corrupted-region self-similarity matrices."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    m_hat, _ = enc.encode(i_hat, mask)
    m_gt, _ = enc.encode(i_gt, mask)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    m_gt = np.asarray(m_gt, dtype=np.float64)
    return _mean_abs(m_hat @ m_hat.T, m_gt @ m_gt.T)


def inter_coord_loss(i_hat, i_gt, mask, enc: RegionEncoder) -> float:
    """Mean |difference| of corrupted-vs-known cross-similarity matrices."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    m_hat, u_hat = enc.encode(i_hat, mask)
    m_gt, u_gt = enc.encode(i_gt, mask)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    u_hat = np.asarray(u_hat, dtype=np.float64)
    m_gt = np.asarray(m_gt, dtype=np.float64)
    u_gt = np.asarray(u_gt, dtype=np.float64)
    return _mean_abs(m_hat @ u_hat.T, m_gt @ u_gt.T)


def inco2_loss(i_hat, i_gt, mask, enc: RegionEncoder) -> float:
    return intra_coord_loss(i_hat, i_gt, mask, enc) + inter_coord_loss(i_hat, i_gt, mask, enc)


def semantic_loss(logits_hat, labels_gt: SemanticMap) -> float:
    """Mean per-pixel cross entropy of label logits against ground truth."""
    logits = _as_image(logits_hat)
    n_classes, h, w = logits.shape
    if (h, w) != (labels_gt.height, labels_gt.width):
        raise ContractViolationError(
            f"logit spatial dims ({h}, {w}) do not match labels "
            f"({labels_gt.height}, {labels_gt.width})"
        )
    if int(labels_gt.labels.max()) >= n_classes:
        raise ContractViolationError(
            f"label {int(labels_gt.labels.max())} out of range for {n_classes} logit channels"
        )
    shifted = logits - logits.max(axis=0, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=0))
    picked = np.take_along_axis(shifted, labels_gt.labels[None, :, :], axis=0)[0]
    return float(np.mean(log_norm - picked))


def rec_loss(i_hat, i_gt) -> float:
    """Mean absolute pixel difference."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    return _mean_abs(i_hat, i_gt)


def rec_loss_grad(i_hat, i_gt) -> np.ndarray:
    """d(rec_loss)/d(i_hat): sign of the residual over element count."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    diff = i_hat.astype(np.float64) - i_gt.astype(np.float64)
    return np.sign(diff) / diff.size


def perceptual_loss(i_hat, i_gt, fx: FeatureExtractor) -> float:
    """Sum over layers of the mean absolute feature difference."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    total = 0.0
    for fa, fb in zip(fx.extract(i_hat), fx.extract(i_gt), strict=True):
        total += _mean_abs(np.asarray(fa), np.asarray(fb))
    return total


def gram(f) -> np.ndarray:
    """Channel co-occurrence matrix, normalized by c*h*w."""
    f = _as_image(f)
    c, h, w = f.shape
    flat = f.reshape(c, h * w)
    return ((flat @ flat.T) / float(c * h * w)).astype(STORAGE_DTYPE)


def style_loss(i_hat, i_gt, fx: FeatureExtractor) -> float:
    """Sum over layers of the mean absolute Gram-matrix difference."""
    i_hat, i_gt = _check_pair(i_hat, i_gt)
    total = 0.0
    for fa, fb in zip(fx.extract(i_hat), fx.extract(i_gt), strict=True):
        total += _mean_abs(gram(fa), gram(fb))
    return total


def adv_loss(d_real, d_fake) -> tuple[float, float]:
    """(discriminator loss, non-saturating generator loss) from critic scores."""
    d_real = np.atleast_1d(np.asarray(d_real, dtype=np.float64))
    d_fake = np.atleast_1d(np.asarray(d_fake, dtype=np.float64))
    for name, scores in (("d_real", d_real), ("d_fake", d_fake)):
        if scores.size == 0:
            raise ContractViolationError(f"{name} must contain at least one score")
        if scores.min() < 0.0 or scores.max() > 1.0:
            raise ContractViolationError(f"{name} scores must lie in [0, 1]")
    eps = 1e-7
    d_real = np.clip(d_real, eps, 1.0 - eps)
    d_fake = np.clip(d_fake, eps, 1.0 - eps)
    d_term = -float(np.mean(np.log(d_real)) + np.mean(np.log(1.0 - d_fake)))
    g_term = -float(np.mean(np.log(d_fake)))
    return d_term, g_term


def tv_loss(i) -> float:
    """Anisotropic total variation, normalized by element count."""
    f = _as_image(i)
    horiz = np.abs(f[:, :, 1:] - f[:, :, :-1]).sum()
    vert = np.abs(f[:, 1:, :] - f[:, :-1, :]).sum()
    return float((horiz + vert) / f.size)


def tv_loss_grad(i) -> np.ndarray:
    """d(tv_loss)/d(i); zero at exactly-equal neighbors."""
    f = _as_image(i)
    grad = np.zeros_like(f)
    sh = np.sign(f[:, :, 1:] - f[:, :, :-1])
    grad[:, :, 1:] += sh
    grad[:, :, :-1] -= sh
    sv = np.sign(f[:, 1:, :] - f[:, :-1, :])
    grad[:, 1:, :] += sv
    grad[:, :-1, :] -= sv
    return grad / f.size


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights for the seven loss terms."""

    inco2: float = 1.0
    semantic: float = 1.0
    rec: float = 1.0
    perc: float = 0.1
    style: float = 250.0
    adv: float = 0.1
    tv: float = 0.1

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if value < 0:
                raise ContractViolationError(f"weight {name} must be nonnegative, got {value}")

    def as_dict(self) -> dict[str, float]:
        return {
            "inco2": self.inco2,
            "semantic": self.semantic,
            "rec": self.rec,
            "perc": self.perc,
            "style": self.style,
            "adv": self.adv,
            "tv": self.tv,
        }

    @classmethod
    def from_config(cls, cfg: dict) -> "LossWeights":
        """Build from flat lambda1..lambda7 keys (missing keys keep defaults)."""
        names = ("inco2", "semantic", "rec", "perc", "style", "adv", "tv")
        kwargs = {}
        for idx, name in enumerate(names, start=1):
            key = f"lambda{idx}"
            if key in cfg:
                try:
                    kwargs[name] = float(cfg[key])
                except ValueError as exc:
                    raise ContractViolationError(f"config key {key} must be a number") from exc
        return cls(**kwargs)


@dataclass(frozen=True)
class LossReport:
    inco2: float
    semantic: float
    rec: float
    perc: float
    style: float
    adv: float
    tv: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "inco2": self.inco2,
            "semantic": self.semantic,
            "rec": self.rec,
            "perc": self.perc,
            "style": self.style,
            "adv": self.adv,
            "tv": self.tv,
            "total": self.total,
        }


def total_loss(
    i_hat,
    i_gt,
    mask,
    weights: LossWeights,
    *,
    encoder: RegionEncoder,
    extractor: FeatureExtractor,
    logits_hat=None,
    labels_gt: Optional[SemanticMap] = None,
    d_real=None,
    d_fake=None,
) -> LossReport:
    """Evaluate every weighted term once and report the weighted sum.

    Terms with weight 0 are skipped and reported as 0. A positive weight
    whose inputs are missing is a contract violation. The adversarial
    entry is the generator-side loss.
    """
    terms = {name: 0.0 for name in weights.as_dict()}
    if weights.inco2 > 0:
        terms["inco2"] = inco2_loss(i_hat, i_gt, mask, encoder)
    if weights.semantic > 0:
        if logits_hat is None or labels_gt is None:
            raise ContractViolationError(
                "semantic weight is positive but logits_hat/labels_gt were not provided"
            )
        terms["semantic"] = semantic_loss(logits_hat, labels_gt)
    if weights.rec > 0:
        terms["rec"] = rec_loss(i_hat, i_gt)
    if weights.perc > 0:
        terms["perc"] = perceptual_loss(i_hat, i_gt, extractor)
    if weights.style > 0:
        terms["style"] = style_loss(i_hat, i_gt, extractor)
    if weights.adv > 0:
        if d_real is None or d_fake is None:
            raise ContractViolationError(
                "adversarial weight is positive but critic scores were not provided"
            )
        _, terms["adv"] = adv_loss(d_real, d_fake)
    if weights.tv > 0:
        terms["tv"] = tv_loss(i_hat)
    w = weights.as_dict()
    total = float(sum(w[name] * terms[name] for name in terms))
    return LossReport(total=total, **terms)
