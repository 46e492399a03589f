#!/usr/bin/env python3
"""
Command-line interface for batch clone detection.

Commands:
    detect      find clones in one image, write masks, overlay and report
    synthesize  forge one image, or a seeded corpus with a manifest
    degrade     apply JPEG / AWGN / blur to an image
    evaluate    score detected masks against ground truth
    sweep       degrade, detect and score a corpus over a parameter grid

Exit codes: 0 success, 1 usage error, 2 processing error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from app.core.errors import FileFormatError, FileSizeError, ForensicsError
from app.core.logging import app_logger, new_correlation_id, setup_logging
from app.models.detection_models import (
    METHOD_ALIASES,
    TH1_METRIC_ALIASES,
    DetectionMethod,
    DetectorConfig,
    Th1Metric
)
from app.models.forgery_models import DegradeSpec, ForgerySpec
from app.services.degrade_forge import (
    CorpusItem,
    build_corpus,
    degrade,
    parse_grid,
    read_manifest,
    synthesize,
    write_manifest
)
from app.services.detection_service import DetectionService
from app.services.evaluation import aggregate_tsv, render_overlay, score, sweep, write_sweep_report
from app.utils.image_io import load_image, load_mask, save_image, save_mask

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PROCESSING = 2


class UsageError(Exception):
    """Bad flags or flag values."""


class ProcessingError(Exception):
    """A failure while reading, computing or writing, tagged with its stage."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad flags."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_help()}")


def _stage(name: str, fn: Callable[..., Any], *args: Any, **kwargs: Any) -> Any:
    try:
        return fn(*args, **kwargs)
    except (ForensicsError, FileFormatError, FileSizeError, OSError) as e:
        raise ProcessingError(name, e) from e


def _int_list(text: str) -> List[int]:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")
    return values


def _add_detector_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("detector")
    group.add_argument(
        "--method",
        choices=[m.value for m in DetectionMethod] + list(METHOD_ALIASES),
        help="Block matcher (dct); iidmjpeg is an alias of dct"
    )
    group.add_argument("--block-size", type=int, help="Block size b (8)")
    group.add_argument("--s12", type=float, help="Quantization step for C1, C2 (2.0)")
    group.add_argument("--s34", type=float, help="Quantization step for C3, C4 (0.01)")
    group.add_argument("--window", type=int, help="Sorted-row comparison window (1)")
    group.add_argument("--th1", type=int, help="Minimum shift magnitude (10)")
    group.add_argument(
        "--th1-metric",
        choices=[m.value for m in Th1Metric] + list(TH1_METRIC_ALIASES),
        help="Shift magnitude metric (chebyshev); paper-absdiff is an alias of abs-diff"
    )
    group.add_argument("--th2", type=int, help="Minimum pair count per class at 128x128 (100)")
    group.add_argument("--no-scale-th2", action="store_true", help="Use TH2 as given for every image size")
    group.add_argument("--se-size", type=int, help="Closing structuring element size (3)")
    group.add_argument("--coarse-steps", help="s12:s34 steps retried when nothing is accepted; '' disables")
    group.add_argument("--coarse-window", type=int, help="Comparison window on coarse steps (10)")
    group.add_argument("--threads", type=int, help="Worker threads (1)")


def _detector_config(args: argparse.Namespace) -> DetectorConfig:
    overrides: Dict[str, Any] = {
        "method": args.method,
        "block_size": args.block_size,
        "s12": args.s12,
        "s34": args.s34,
        "window": args.window,
        "th1": args.th1,
        "th1_metric": args.th1_metric,
        "th2": args.th2,
        "se_size": args.se_size,
        "coarse_steps": args.coarse_steps,
        "coarse_window": args.coarse_window,
        "threads": args.threads,
    }
    if args.no_scale_th2:
        overrides["scale_th2"] = False
    try:
        return DetectorConfig.from_settings(**overrides)
    except ValidationError as e:
        raise UsageError(_validation_message(e))


def _degrade_spec(args: argparse.Namespace) -> DegradeSpec:
    try:
        return DegradeSpec(
            jpeg_qf=args.jpeg_qf,
            awgn_snr_db=args.snr,
            blur_size=args.blur_size,
            blur_sigma=args.blur_sigma,
            seed=args.seed,
        )
    except ValidationError as e:
        raise UsageError(_validation_message(e))


def _validation_message(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        field = ".".join(str(loc) for loc in err["loc"]) or "value"
        parts.append(f"--{field.replace('_', '-')}: {err['msg']}")
    return "; ".join(parts)


def _write_json(path: Path, document: Any) -> None:
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir)
    _stage("create output directory", out.mkdir, parents=True, exist_ok=True)
    return out


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _detector_config(args)
    img = _stage(f"read {args.input}", load_image, args.input)
    result = _stage("detect", DetectionService.run, img, cfg, Path(args.input).name)

    out = _out_dir(args)
    _stage("write masks", save_mask, result.source_mask, out / "source_mask.png")
    _stage("write masks", save_mask, result.dest_mask, out / "dest_mask.png")
    overlay = render_overlay(img, [result.source_mask, result.dest_mask])
    _stage("write overlay", save_image, overlay, out / "overlay.png")
    report = {"image": Path(args.input).name, **DetectionService.report_document(result)}
    _stage("write report", _write_json, out / "report.json", report)
    _stage("write timing", _write_json, out / "timing.json", {k: round(v, 3) for k, v in result.timing.items()})

    shifts = ", ".join(f"({c.shift[0]}, {c.shift[1]}) x{c.count}" for c in result.accepted) or "none"
    print(f"{Path(args.input).name}: accepted shift classes: {shifts}")
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    if args.input is not None:
        if args.source_rect is None or args.dest_origin is None:
            raise UsageError("synthesize --in needs --source-rect ROW,COL,H,W and --dest-origin ROW,COL")
        if len(args.source_rect) != 4 or len(args.dest_origin) != 2:
            raise UsageError("--source-rect takes 4 integers and --dest-origin takes 2")
        try:
            spec = ForgerySpec(
                source_row=args.source_rect[0], source_col=args.source_rect[1],
                height=args.source_rect[2], width=args.source_rect[3],
                dest_row=args.dest_origin[0], dest_col=args.dest_origin[1],
                intensity_delta=args.delta, intensity_gain=args.gain, seed=args.seed,
            )
        except ValidationError as e:
            raise UsageError(_validation_message(e))
        base = _stage(f"read {args.input}", load_image, args.input)
        forged, gt_source, gt_dest = _stage("synthesize", synthesize, base, spec)
        items = [CorpusItem(Path(args.input).stem, forged, gt_source, gt_dest, spec)]
    else:
        if args.count < 1 or args.size < 1 or args.region < 1 or args.align < 1:
            raise UsageError("--count, --size, --region and --align must be positive")
        items = _stage(
            "synthesize corpus", build_corpus,
            count=args.count, rows=args.size, cols=args.size, region=args.region,
            seed=args.seed, kind=args.kind, align=args.align, threads=args.threads or 1,
        )

    out = _out_dir(args)
    _stage("write corpus", _write_corpus, items, out)
    print(f"Wrote {len(items)} forgeries to {out}")
    return EXIT_OK


def _write_corpus(items: Sequence[CorpusItem], out: Path) -> None:
    for item in items:
        save_image(item.forged, out / f"{item.image_id}.png")
        save_mask(item.gt_source, out / f"{item.image_id}_gt_source.png")
        save_mask(item.gt_dest, out / f"{item.image_id}_gt_dest.png")
    write_manifest(items, out / "manifest.jsonl")


def _read_corpus(corpus_dir: Path) -> List[CorpusItem]:
    items = []
    for image_id, spec in read_manifest(corpus_dir / "manifest.jsonl"):
        items.append(CorpusItem(
            image_id,
            load_image(corpus_dir / f"{image_id}.png"),
            load_mask(corpus_dir / f"{image_id}_gt_source.png"),
            load_mask(corpus_dir / f"{image_id}_gt_dest.png"),
            spec,
        ))
    return items


def cmd_degrade(args: argparse.Namespace) -> int:
    spec = _degrade_spec(args)
    img = _stage(f"read {args.input}", load_image, args.input)
    degraded = _stage(f"degrade {spec.label}", degrade, img, spec)
    if args.out is not None:
        target = Path(args.out)
    else:
        target = _out_dir(args) / f"{Path(args.input).stem}_{spec.label.replace('=', '')}.png"
    _stage(f"write {target}", save_image, degraded, target)
    print(f"Wrote {target} ({spec.label})")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    detected = (
        _stage(f"read {args.detected_source}", load_mask, args.detected_source),
        _stage(f"read {args.detected_dest}", load_mask, args.detected_dest),
    )
    truth = (
        _stage(f"read {args.truth_source}", load_mask, args.truth_source),
        _stage(f"read {args.truth_dest}", load_mask, args.truth_dest),
    )
    report = _stage("score", score, detected, truth)
    document = report.model_dump(mode="json", exclude={"timing_ms", "config", "degradation"})
    if args.out_dir is not None:
        _stage("write report", _write_json, _out_dir(args) / "eval.json", document)
    print(json.dumps(document))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _detector_config(args)
    try:
        grid = parse_grid(args.grid, base_qf=args.base_qf)
    except (ValueError, ValidationError) as e:
        raise UsageError(f"--grid: {e}")

    if args.corpus_dir is not None:
        corpus = _stage(f"read corpus {args.corpus_dir}", _read_corpus, Path(args.corpus_dir))
    else:
        corpus = _stage(
            "synthesize corpus", build_corpus,
            count=args.count, rows=args.size, cols=args.size, region=args.region,
            seed=args.seed, kind=args.kind, align=args.align, threads=cfg.threads,
        )
    if not corpus:
        raise UsageError("sweep needs a non-empty corpus")

    report = sweep(corpus, grid, cfg, seed=args.seed, threads=cfg.threads)
    out = _out_dir(args)
    _stage("write report", write_sweep_report, report, out)
    _stage("write report", _write_json, out / "config.json", cfg.to_document())
    sys.stdout.write(aggregate_tsv(report.aggregate))
    return EXIT_OK


def _add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("synthesized corpus")
    group.add_argument("--count", type=int, default=20, help="Number of forgeries (20)")
    group.add_argument("--size", type=int, default=128, help="Image side in pixels (128)")
    group.add_argument("--region", type=int, default=40, help="Clone side in pixels (40)")
    group.add_argument("--kind", choices=["texture", "noise"], default="texture", help="Base image kind")
    group.add_argument("--align", type=int, default=1, help="Place clone origins on multiples of this (1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clone-detector", description="Intensity-invariant copy-move forgery detection")
    subparsers = parser.add_subparsers(dest="command", parser_class=_Parser)

    detect_parser = subparsers.add_parser("detect", help="Detect clones in one image")
    detect_parser.add_argument("--in", dest="input", required=True, help="Input image")
    detect_parser.add_argument("--out-dir", default=".", help="Output directory")
    _add_detector_flags(detect_parser)
    detect_parser.set_defaults(handler=cmd_detect)

    synth_parser = subparsers.add_parser("synthesize", help="Synthesize forgeries")
    synth_parser.add_argument("--in", dest="input", help="Base image; omit to synthesize a corpus")
    synth_parser.add_argument("--out-dir", default=".", help="Output directory")
    synth_parser.add_argument("--source-rect", type=_int_list, help="ROW,COL,H,W of the copied region")
    synth_parser.add_argument("--dest-origin", type=_int_list, help="ROW,COL of the pasted region")
    synth_parser.add_argument("--delta", type=int, default=0, help="Additive intensity change")
    synth_parser.add_argument("--gain", type=float, default=1.0, help="Multiplicative intensity change")
    synth_parser.add_argument("--seed", type=int, default=0, help="Seed")
    synth_parser.add_argument("--threads", type=int, default=1, help="Worker threads (1)")
    _add_corpus_flags(synth_parser)
    synth_parser.set_defaults(handler=cmd_synthesize)

    degrade_parser = subparsers.add_parser("degrade", help="Degrade one image")
    degrade_parser.add_argument("--in", dest="input", required=True, help="Input image")
    degrade_parser.add_argument("--out", help="Output image path")
    degrade_parser.add_argument("--out-dir", default=".", help="Output directory when --out is omitted")
    degrade_parser.add_argument("--jpeg-qf", type=int, help="JPEG quality factor 1-100")
    degrade_parser.add_argument("--snr", type=float, help="AWGN SNR in dB")
    degrade_parser.add_argument("--blur-size", type=int, help="Gaussian filter size")
    degrade_parser.add_argument("--blur-sigma", type=float, help="Gaussian standard deviation")
    degrade_parser.add_argument("--seed", type=int, default=0, help="Noise seed")
    degrade_parser.set_defaults(handler=cmd_degrade)

    eval_parser = subparsers.add_parser("evaluate", help="Score detected masks against ground truth")
    eval_parser.add_argument("--detected-source", required=True, help="Detected source mask PNG")
    eval_parser.add_argument("--detected-dest", required=True, help="Detected destination mask PNG")
    eval_parser.add_argument("--truth-source", required=True, help="Ground-truth source mask PNG")
    eval_parser.add_argument("--truth-dest", required=True, help="Ground-truth destination mask PNG")
    eval_parser.add_argument("--out-dir", help="Write eval.json here")
    eval_parser.set_defaults(handler=cmd_evaluate)

    sweep_parser = subparsers.add_parser("sweep", help="Run a degradation sweep")
    sweep_parser.add_argument("--grid", required=True, help="Grid, e.g. qf=100,75,50 or identity;snr=20,40")
    sweep_parser.add_argument("--base-qf", type=int, help="Compress noise/blur/identity points at this QF first")
    sweep_parser.add_argument("--corpus-dir", help="Corpus written by synthesize; synthesized in memory when omitted")
    sweep_parser.add_argument("--out-dir", default=".", help="Output directory")
    sweep_parser.add_argument("--seed", type=int, default=0, help="Seed for corpus and noise")
    _add_corpus_flags(sweep_parser)
    _add_detector_flags(sweep_parser)
    sweep_parser.set_defaults(handler=cmd_sweep)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
        if getattr(args, "handler", None) is None:
            raise UsageError(parser.format_help())
        setup_logging(use_stderr=True)
        new_correlation_id()
        return int(args.handler(args))
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ProcessingError as e:
        app_logger.error(f"Command failed at {e.stage}: {e.cause}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PROCESSING


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
