"""Command-line harness.

Subcommands: gen-corpus, mem-sim, pipeline, losses, mask-gen, grad-check.
Each accepts --config <flat key=value file>, --seed <u64> and --out <dir>.
Exit codes: 0 success, 2 contract violation, 3 format error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import pnm, report
from .config import get_bool, get_float, get_int, parse_config
from .errors import ContractViolationError, FormatError, MemfillError
from .gradcheck import grad_check
from .losses import (
    LossWeights,
    SeededCritic,
    SeededFeatureExtractor,
    SeededRegionEncoder,
    rec_loss,
    rec_loss_grad,
    total_loss,
    tv_loss,
    tv_loss_grad,
)
from .masks import band_for_coverage, coverage_fraction, generate_irregular_mask
from .patch_correlation import CorrelationConfig
from .regions import load_mask_pgm, save_labels_pgm, save_mask_pgm
from .simulate import DEGRADED_Q_SIGMA, run_memory_sim, run_pipeline
from .slot_memory import init_memory, load_memory, save_memory
from .synthetic import gen_corpus
from .tensor import load_matrix

GRAD_TOLERANCE = 1e-4


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_config(args) -> dict:
    return parse_config(args.config) if args.config else {}


def _corpus_from_config(cfg, seed):
    coverage = get_float(cfg, "coverage", -1.0)
    return gen_corpus(
        count=get_int(cfg, "count", 32),
        h=get_int(cfg, "height", 24),
        w=get_int(cfg, "width", 24),
        n_classes=get_int(cfg, "classes", 4),
        seed=seed,
        coverage=None if coverage < 0 else coverage,
    )


def _query_sigma(cfg) -> float:
    if get_bool(cfg, "degraded_q", False):
        return get_float(cfg, "sigma", DEGRADED_Q_SIGMA)
    return 0.0


def _loss_backends(seed):
    return (
        SeededRegionEncoder(seed=seed),
        SeededFeatureExtractor(seed=seed + 1),
        SeededCritic(seed=seed + 2),
    )


def cmd_gen_corpus(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    corpus = _corpus_from_config(cfg, args.seed)
    records = []
    for idx, sample in enumerate(corpus):
        stem = f"sample_{idx:03d}"
        pnm.write_ppm(out / f"{stem}.ppm", sample.image)
        save_labels_pgm(out / f"{stem}_labels.pgm", sample.semantic)
        save_mask_pgm(out / f"{stem}_mask.pgm", sample.mask)
        fraction = coverage_fraction(sample.mask)
        band = band_for_coverage(fraction)
        records.append(
            {
                "index": idx,
                "seed": sample.seed,
                "corrupted_fraction": fraction,
                "band": band[2] if band else "other",
                "classes": sample.semantic.n,
                "height": sample.semantic.height,
                "width": sample.semantic.width,
            }
        )
    report.write_jsonl(out / "corpus.jsonl", records)
    report.plot_coverage([r["corrupted_fraction"] for r in records], out / "figures" / "coverage.png")
    print(f"wrote {len(corpus)} samples to {out}")
    return 0


def cmd_mem_sim(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    corpus = _corpus_from_config(cfg, args.seed)
    if "memory_in" in cfg:
        mem = load_memory(cfg["memory_in"])
        if mem.n != corpus[0].semantic.n or mem.c != 3:
            raise ContractViolationError(
                f"loaded memory ({mem.n} blocks, c={mem.c}) does not fit corpus "
                f"({corpus[0].semantic.n} classes, c=3)"
            )
    else:
        mem = init_memory(
            n=corpus[0].semantic.n,
            m=get_int(cfg, "slots", 16),
            c=3,
            alpha=get_float(cfg, "alpha", 0.99),
            seed=args.seed,
        )
    sim, final_mem = run_memory_sim(
        corpus,
        mem,
        steps=get_int(cfg, "steps", 200),
        query_sigma=_query_sigma(cfg),
        noise_seed=args.seed,
    )
    report.write_jsonl(out / "sim_report.jsonl", report.sim_report_records(sim))
    save_memory(out / "memory.mdm", final_mem)
    if sim.step_errors:
        report.plot_retrieval_curve(sim, out / "figures" / "retrieval_error.png")
    if sim.band_stats:
        report.plot_band_errors(sim.band_stats, out / "figures" / "band_error.png")
    print(
        f"mem-sim: {sim.steps} steps over {sim.samples} samples in "
        f"{sim.runtime_seconds:.2f}s; error {sim.initial_error} -> {sim.final_error}"
    )
    return 0


def _correlation_config(cfg) -> CorrelationConfig:
    proj_a = load_matrix(cfg["projection_a"]) if "projection_a" in cfg else None
    proj_b = load_matrix(cfg["projection_b"]) if "projection_b" in cfg else None
    return CorrelationConfig(
        patch_size=get_int(cfg, "patch", 3),
        stride=get_int(cfg, "stride", 3),
        projection_a=proj_a,
        projection_b=proj_b,
        normalize_scores=get_bool(cfg, "normalize", True),
    )


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    corpus = _corpus_from_config(cfg, args.seed)
    corr_cfg = _correlation_config(cfg)
    weights = LossWeights.from_config(cfg)
    encoder, extractor, critic = _loss_backends(args.seed)
    if "memory_in" in cfg:
        mem = load_memory(cfg["memory_in"])
    else:
        mem = init_memory(
            n=corpus[0].semantic.n,
            m=get_int(cfg, "slots", 16),
            c=3,
            alpha=get_float(cfg, "alpha", 0.99),
            seed=args.seed,
        )
        warmup = get_int(cfg, "warmup_steps", 50)
        if warmup > 0:
            _, mem = run_memory_sim(corpus, mem, warmup, query_sigma=_query_sigma(cfg))
    loss_records = []
    metric_records = []
    for idx, sample in enumerate(corpus):
        result = run_pipeline(
            sample,
            mem,
            corr_cfg,
            weights,
            encoder=encoder,
            extractor=extractor,
            critic=critic,
            query_sigma=_query_sigma(cfg),
            noise_seed=sample.seed,
        )
        pnm.write_ppm(out / f"completed_{idx:03d}.ppm", result.completed)
        loss_records.append(result.losses.as_dict())
        band = band_for_coverage(coverage_fraction(sample.mask))
        metric_records.append(
            {"index": idx, "band": band[2] if band else "other", **result.metrics}
        )
        if idx == 0:
            report.plot_sample_montage(sample, result.completed, out / "figures" / "montage.png")
    report.write_jsonl(out / "losses.jsonl", loss_records)
    report.write_jsonl(out / "metrics.jsonl", metric_records)
    term_means = {
        key: float(np.mean([r[key] for r in loss_records])) for key in loss_records[0]
    }
    report.plot_loss_terms(term_means, out / "figures" / "loss_terms.png")
    report.plot_metrics_by_band(metric_records, out / "figures" / "metrics_by_band.png")
    print(f"pipeline: {len(corpus)} samples; mean total loss {term_means['total']:.4f}")
    return 0


def cmd_losses(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    for key in ("image_hat", "image_gt"):
        if key not in cfg:
            raise ContractViolationError(f"losses requires config key {key} (PPM path)")
    i_hat = pnm.read_ppm(cfg["image_hat"])
    i_gt = pnm.read_ppm(cfg["image_gt"])
    if "mask" in cfg:
        mask = load_mask_pgm(cfg["mask"])
    else:
        mask = np.ones(i_hat.shape[1:], dtype=np.uint8)
    weights = LossWeights.from_config(cfg)
    encoder, extractor, critic = _loss_backends(args.seed)
    d_real = critic.score(i_gt) if weights.adv > 0 else None
    d_fake = critic.score(i_hat) if weights.adv > 0 else None
    # No parser output is available from image files alone.
    weights = LossWeights(**{**weights.as_dict(), "semantic": 0.0})
    result = total_loss(
        i_hat,
        i_gt,
        mask,
        weights,
        encoder=encoder,
        extractor=extractor,
        d_real=d_real,
        d_fake=d_fake,
    )
    report.write_jsonl(out / "losses.jsonl", [result.as_dict()])
    report.plot_loss_terms(result.as_dict(), out / "figures" / "loss_terms.png")
    print(f"losses: total {result.total:.6f}")
    return 0


def cmd_mask_gen(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    count = get_int(cfg, "count", 50)
    h = get_int(cfg, "height", 64)
    w = get_int(cfg, "width", 64)
    coverage = get_float(cfg, "coverage", 0.3)
    records = []
    for idx in range(count):
        mask = generate_irregular_mask(h, w, coverage, args.seed + idx)
        save_mask_pgm(out / f"mask_{idx:03d}.pgm", mask)
        fraction = coverage_fraction(mask)
        band = band_for_coverage(fraction)
        records.append(
            {
                "index": idx,
                "seed": args.seed + idx,
                "corrupted_fraction": fraction,
                "band": band[2] if band else "other",
            }
        )
    report.write_jsonl(out / "masks.jsonl", records)
    report.plot_coverage([r["corrupted_fraction"] for r in records], out / "figures" / "coverage.png")
    print(f"mask-gen: {count} masks at target {coverage} written to {out}")
    return 0


def cmd_grad_check(args) -> int:
    cfg = _load_config(args)
    out = _outdir(args)
    points = get_int(cfg, "points", 100)
    # both checked losses are piecewise linear: central differences are exact
    # for any eps below the kink distance, and a larger eps drowns float noise
    eps = get_float(cfg, "eps", 1e-3)
    shape = (get_int(cfg, "channels", 2), get_int(cfg, "height", 5), get_int(cfg, "width", 6))
    rng = np.random.default_rng(args.seed)
    worst = {"rec": 0.0, "tv": 0.0}
    for _ in range(points):
        x = rng.uniform(0.0, 1.0, size=shape)
        target = rng.uniform(0.0, 1.0, size=shape)
        # keep probes away from the |.| kink
        resid = x - target
        x = np.where(np.abs(resid) < 0.01, x + 0.02, x)
        err = grad_check(lambda t: rec_loss(t, target), x, rec_loss_grad(x, target), eps)
        worst["rec"] = max(worst["rec"], err)
        # strictly increasing along both axes keeps every diff >= 0.01
        y = np.cumsum(np.cumsum(rng.uniform(0.01, 0.2, size=shape), axis=1), axis=2)
        err = grad_check(tv_loss, y, tv_loss_grad(y), eps)
        worst["tv"] = max(worst["tv"], err)
    passed = all(v < GRAD_TOLERANCE for v in worst.values())
    report.write_jsonl(
        out / "grad_report.jsonl",
        [
            {"loss": name, "max_rel_error": value, "tolerance": GRAD_TOLERANCE}
            for name, value in worst.items()
        ],
    )
    report.plot_grad_errors(worst, GRAD_TOLERANCE, out / "figures" / "grad_error.png")
    for name, value in worst.items():
        print(f"grad-check {name}: max relative error {value:.3e} -> {'PASS' if value < GRAD_TOLERANCE else 'FAIL'}")
    return 0 if passed else 1


_COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "mem-sim": cmd_mem_sim,
    "pipeline": cmd_pipeline,
    "losses": cmd_losses,
    "mask-gen": cmd_mask_gen,
    "grad-check": cmd_grad_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memfill",
        description="Deterministic slot-memory region completion harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out", default="out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ContractViolationError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except (MemfillError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
