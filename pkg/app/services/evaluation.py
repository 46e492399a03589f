"""
Pixel-level scoring and the degradation sweep harness.

ACC = (|R1 & D1| + |R2 & D2|) / (|R1| + |R2|)
FP  = (|D1 - R1| + |D2 - R2|) / (|R1| + |R2|)

D1/D2 are paired with R1/R2 in whichever order gives the higher ACC (then
the lower FP); the identity pairing wins ties.
"""

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.errors import EmptyGroundTruth, InvalidImageError
from app.core.logging import app_logger, log_performance_metric, log_sweep_cell
from app.models.detection_models import DetectorConfig
from app.models.eval_models import AggregateRow, EvalReport, SweepCell, SweepReport
from app.models.forgery_models import DegradeSpec
from app.services.degrade_forge import CorpusItem, degrade
from app.services.detection_service import DetectionService
from app.services.pixel_core import BinaryMask, RgbImage

MaskPair = Tuple[BinaryMask, BinaryMask]

OVERLAY_COLOR = (255, 140, 0)
OVERLAY_ALPHA = 0.6
SHIFT_TOLERANCE = 2

AGGREGATE_FIELDS = ["grid_index", "grid_label", "cells", "failed", "localized", "mean_acc", "mean_fp"]


def score(
    detected: MaskPair,
    truth: MaskPair,
    timing_ms: Optional[Dict[str, float]] = None,
    config: Optional[Dict] = None,
    degradation: Optional[Dict] = None
) -> EvalReport:
    """ACC and FP of detected masks (D1, D2) against truth (R1, R2)."""
    d1, d2 = detected
    r1, r2 = truth
    for mask in (d2, r1, r2):
        d1.require_same_shape(mask)
    truth_pixels = r1.popcount() + r2.popcount()
    if truth_pixels == 0:
        raise EmptyGroundTruth("Ground-truth masks are both empty")

    def assess(a: BinaryMask, b: BinaryMask) -> Tuple[int, int]:
        tp = (r1 & a).popcount() + (r2 & b).popcount()
        spurious = (a - r1).popcount() + (b - r2).popcount()
        return tp, spurious

    tp, spurious = assess(d1, d2)
    tp_swap, spurious_swap = assess(d2, d1)
    swapped = (tp_swap, -spurious_swap) > (tp, -spurious)
    if swapped:
        tp, spurious = tp_swap, spurious_swap

    return EvalReport(
        acc=tp / truth_pixels,
        fp=spurious / truth_pixels,
        detected_pixels=d1.popcount() + d2.popcount(),
        true_positive_pixels=tp,
        false_positive_pixels=spurious,
        truth_pixels=truth_pixels,
        swapped=swapped,
        timing_ms=timing_ms or {},
        config=config or {},
        degradation=degradation or {},
    )


def _cell_seed(seed: int, image_index: int, grid_index: int) -> int:
    return int(np.random.SeedSequence([seed, image_index, grid_index]).generate_state(1)[0])


def _localized(shift: Optional[Tuple[int, int]], expected: Tuple[int, int], tolerance: int) -> bool:
    if shift is None:
        return False
    return abs(shift[0] - expected[0]) <= tolerance and abs(shift[1] - expected[1]) <= tolerance


def run_cell(
    item: CorpusItem,
    image_index: int,
    point: DegradeSpec,
    grid_index: int,
    cfg: DetectorConfig,
    seed: int = 0,
    tolerance: int = SHIFT_TOLERANCE
) -> SweepCell:
    """Degrade, detect and score one corpus image at one grid point."""
    spec = point.with_seed(_cell_seed(seed, image_index, grid_index))
    expected = list(item.spec.expected_shift)
    base = {
        "image_id": item.image_id,
        "grid_index": grid_index,
        "grid_label": point.label,
        "degradation": spec.to_document(),
        "expected_shift": expected,
    }
    try:
        started = time.perf_counter()
        degraded = degrade(item.forged, spec)
        degrade_ms = (time.perf_counter() - started) * 1000.0
        result = DetectionService.run(degraded, cfg, image_id=f"{item.image_id}@{point.label}")
        report = score((result.source_mask, result.dest_mask), (item.gt_source, item.gt_dest))
        shift = result.dominant_shift
        cell = SweepCell(
            **base,
            acc=report.acc,
            fp=report.fp,
            detected_pixels=report.detected_pixels,
            fp_pixels=report.false_positive_pixels,
            accepted_shift=list(shift) if shift else None,
            localized=_localized(shift, item.spec.expected_shift, tolerance),
            rung=result.rung,
            timing_ms={"degrade": degrade_ms, **result.timing},
        )
    except Exception as e:
        cell = SweepCell(**base, failed=True, error=f"{type(e).__name__}: {str(e)}")

    log_sweep_cell(cell.image_id, cell.grid_label, cell.acc, cell.fp, cell.failed, cell.error)
    return cell


def aggregate(cells: Sequence[SweepCell], grid: Sequence[DegradeSpec]) -> List[AggregateRow]:
    """Mean ACC/FP per grid point, in grid order; failed cells count as 0."""
    rows = []
    for index, point in enumerate(grid):
        members = [c for c in cells if c.grid_index == index]
        n = len(members)
        rows.append(AggregateRow(
            grid_index=index,
            grid_label=point.label,
            cells=n,
            failed=sum(c.failed for c in members),
            localized=sum(c.localized for c in members),
            mean_acc=float(np.mean([c.acc for c in members])) if n else 0.0,
            mean_fp=float(np.mean([c.fp for c in members])) if n else 0.0,
        ))
    return rows


def sweep(
    corpus: Sequence[CorpusItem],
    grid: Sequence[DegradeSpec],
    cfg: Optional[DetectorConfig] = None,
    seed: int = 0,
    threads: int = 1,
    tolerance: int = SHIFT_TOLERANCE
) -> SweepReport:
    """Every (image, grid point) cell, corpus-major; never raises per cell.

    Cell seeds come from (seed, image index, grid index), so the report does
    not depend on ``threads``.
    """
    cfg = cfg or DetectorConfig.from_settings()
    jobs = [(i, g) for i in range(len(corpus)) for g in range(len(grid))]
    started = time.perf_counter()

    def work(job: Tuple[int, int]) -> SweepCell:
        i, g = job
        return run_cell(corpus[i], i, grid[g], g, cfg, seed, tolerance)

    if threads <= 1:
        cells = [work(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(work, jobs))

    elapsed_ms = (time.perf_counter() - started) * 1000.0
    log_performance_metric(
        "sweep_duration", round(elapsed_ms, 2),
        context={"cells": len(cells), "grid_points": len(grid), "images": len(corpus)}
    )
    failed = sum(c.failed for c in cells)
    if failed:
        app_logger.warning(f"Sweep finished with {failed} failed cell(s) of {len(cells)}")
    return SweepReport(cells=cells, aggregate=aggregate(cells, grid), config=cfg.to_document())


def cells_jsonl(cells: Sequence[SweepCell]) -> str:
    return "".join(json.dumps(c.to_record()) + "\n" for c in cells)


def timings_jsonl(cells: Sequence[SweepCell]) -> str:
    lines = []
    for c in cells:
        record = {"image_id": c.image_id, "grid_index": c.grid_index, "timing_ms": c.timing_ms}
        lines.append(json.dumps(record) + "\n")
    return "".join(lines)


def aggregate_tsv(rows: Sequence[AggregateRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter="\t", lineterminator="\n")
    writer.writerow(AGGREGATE_FIELDS)
    for row in rows:
        doc = row.model_dump()
        writer.writerow([
            f"{doc[name]:.6f}" if isinstance(doc[name], float) else doc[name]
            for name in AGGREGATE_FIELDS
        ])
    return buffer.getvalue()


def write_sweep_report(report: SweepReport, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """report.jsonl and aggregate.tsv (deterministic) plus timings.jsonl."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.jsonl",
        "aggregate": out / "aggregate.tsv",
        "timings": out / "timings.jsonl",
    }
    paths["report"].write_text(cells_jsonl(report.cells), encoding="utf-8")
    paths["aggregate"].write_text(aggregate_tsv(report.aggregate), encoding="utf-8")
    paths["timings"].write_text(timings_jsonl(report.cells), encoding="utf-8")
    return paths


def render_overlay(
    img: RgbImage,
    masks: Sequence[BinaryMask],
    color: Tuple[int, int, int] = OVERLAY_COLOR,
    alpha: float = OVERLAY_ALPHA
) -> RgbImage:
    """Tint every pixel of any mask towards ``color``."""
    pixels = img.pixels.astype(np.float64)
    hit = np.zeros(img.shape, dtype=bool)
    for mask in masks:
        if mask.shape != img.shape:
            raise InvalidImageError(f"Mask shape {mask.shape} does not match image {img.shape}")
        hit |= mask.bits
    tint = np.asarray(color, dtype=np.float64)
    pixels[hit] = (1.0 - alpha) * pixels[hit] + alpha * tint
    return RgbImage(np.clip(np.floor(pixels + 0.5), 0, 255))
