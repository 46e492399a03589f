"""
Duplicate-block matching: feature matrix, lexicographic sort, neighbour
comparison, shift classes, TH1/TH2 filtering and mask rendering.

Shift vectors are (dx, dy) = (row shift, column shift) from the
lexicographically smaller origin of a pair to the larger one, so every
canonical shift has dx > 0, or dx == 0 and dy > 0. Nc counts block pairs.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ImageTooSmall
from app.core.logging import app_logger
from app.models.detection_models import DetectorConfig, Th1Metric
from app.services.features import QuantizedFeatureRow, extract_features, quantize_features
from app.services.morphology import StructuringElement, close
from app.services.pixel_core import BinaryMask, LumaImage, Origin, RgbImage, block_grid, to_luma

Shift = Tuple[int, int]

# Block size of the JPEG codec. Rungs with a lowered TH2 ignore shifts on this grid.
JPEG_GRID = 8


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Matrix T: one integer row per block plus the block origin.

    ``features`` optionally carries the unquantized rows; equal integer
    rows are then ordered by them before the origin.
    """

    values: np.ndarray
    origins: np.ndarray
    features: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int64)
        origins = np.asarray(self.origins, dtype=np.int64)
        if values.ndim != 2 or origins.shape != (values.shape[0], 2):
            raise ValueError(
                f"Feature matrix needs (R, k) values and (R, 2) origins, got {values.shape} and {origins.shape}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "origins", origins)
        if self.features is not None:
            features = np.asarray(self.features, dtype=np.float64)
            if features.shape != values.shape:
                raise ValueError(f"Unquantized rows {features.shape} do not match values {values.shape}")
            object.__setattr__(self, "features", features)

    @classmethod
    def from_rows(cls, rows: Sequence[QuantizedFeatureRow]) -> "FeatureMatrix":
        values = np.array([row.key for row in rows], dtype=np.int64).reshape(len(rows), 4)
        origins = np.array([row.origin for row in rows], dtype=np.int64).reshape(len(rows), 2)
        return cls(values, origins)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def rows(self) -> List[QuantizedFeatureRow]:
        if self.width != 4:
            raise ValueError(f"Rows of width {self.width} are not quantized feature rows")
        return [
            QuantizedFeatureRow(int(v[0]), int(v[1]), int(v[2]), int(v[3]), (int(o[0]), int(o[1])))
            for v, o in zip(self.values, self.origins)
        ]


@dataclass(frozen=True)
class MatchPair:
    a: Origin
    b: Origin

    @classmethod
    def canonical(cls, first: Origin, second: Origin) -> "MatchPair":
        if tuple(first) > tuple(second):
            first, second = second, first
        return cls(tuple(first), tuple(second))  # type: ignore[arg-type]

    @property
    def shift(self) -> Shift:
        return self.b[0] - self.a[0], self.b[1] - self.a[1]


@dataclass(frozen=True, eq=False)
class MatchPairs:
    """Array-backed list of canonical match pairs."""

    sources: np.ndarray
    targets: np.ndarray

    @classmethod
    def empty(cls) -> "MatchPairs":
        return cls(np.zeros((0, 2), dtype=np.int64), np.zeros((0, 2), dtype=np.int64))

    def __len__(self) -> int:
        return int(self.sources.shape[0])

    def __iter__(self) -> Iterator[MatchPair]:
        for a, b in zip(self.sources, self.targets):
            yield MatchPair((int(a[0]), int(a[1])), (int(b[0]), int(b[1])))

    @property
    def shifts(self) -> np.ndarray:
        return self.targets - self.sources

    def as_set(self) -> set:
        return set(self)


@dataclass(frozen=True, eq=False)
class ShiftClass:
    shift: Shift
    sources: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)

    @property
    def count(self) -> int:
        return int(self.sources.shape[0])

    @property
    def pairs(self) -> MatchPairs:
        return MatchPairs(self.sources, self.targets)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Masks after closing, accepted classes and stage timings in ms.

    ``rung`` is 0 for the configured steps and k for the k-th coarse step.
    """

    source_mask: BinaryMask
    dest_mask: BinaryMask
    accepted: List[ShiftClass]
    timing: Dict[str, float]
    raw_source_mask: BinaryMask
    raw_dest_mask: BinaryMask
    blocks: int
    effective_th2: int
    config: DetectorConfig
    rung: int = 0

    @property
    def forged(self) -> bool:
        return bool(self.accepted)

    @property
    def dominant_shift(self) -> Optional[Shift]:
        return self.accepted[0].shift if self.accepted else None

    @property
    def shape(self) -> Tuple[int, int]:
        return self.source_mask.shape


def canonicalize(first: np.ndarray, second: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Order each pair so the lexicographically smaller origin comes first."""
    swap = (first[:, 0] > second[:, 0]) | ((first[:, 0] == second[:, 0]) & (first[:, 1] > second[:, 1]))
    sources = np.where(swap[:, None], second, first)
    targets = np.where(swap[:, None], first, second)
    return sources, targets


def sort_rows(t: FeatureMatrix) -> FeatureMatrix:
    """Stable lexicographic order of the rows.

    Equal rows are ordered by their unquantized features when T carries
    them, then by row-major origin.
    """
    if len(t) == 0:
        return t
    keys = [t.origins[:, 1], t.origins[:, 0]]
    if t.features is not None:
        keys.extend(t.features[:, j] for j in reversed(range(t.width)))
    keys.extend(t.values[:, j] for j in reversed(range(t.width)))
    order = np.lexsort(keys)
    features = t.features[order] if t.features is not None else None
    return FeatureMatrix(t.values[order], t.origins[order], features)


def find_pairs(t: FeatureMatrix, window: int = 1) -> MatchPairs:
    """Pairs of equal rows at most ``window`` positions apart in sorted T."""
    if window < 1:
        raise ValueError(f"Window must be at least 1, got {window}")
    n = len(t)
    first_idx: List[np.ndarray] = []
    lags: List[np.ndarray] = []
    for lag in range(1, min(window, n - 1) + 1):
        equal = np.all(t.values[:-lag] == t.values[lag:], axis=1)
        idx = np.nonzero(equal)[0]
        first_idx.append(idx)
        lags.append(np.full(idx.shape, lag, dtype=np.int64))
    if not first_idx or sum(len(i) for i in first_idx) == 0:
        return MatchPairs.empty()
    idx = np.concatenate(first_idx)
    lag = np.concatenate(lags)
    order = np.lexsort((lag, idx))
    idx, lag = idx[order], lag[order]
    sources, targets = canonicalize(t.origins[idx], t.origins[idx + lag])
    return MatchPairs(sources, targets)


def classify_shifts(pairs: MatchPairs) -> List[ShiftClass]:
    """Group pairs by shift; largest classes first, ties by shift."""
    if len(pairs) == 0:
        return []
    uniq, inverse, counts = np.unique(
        pairs.shifts, axis=0, return_inverse=True, return_counts=True
    )
    inverse = np.asarray(inverse).ravel()
    perm = np.argsort(inverse, kind="stable")
    groups = np.split(perm, np.cumsum(counts)[:-1])
    order = sorted(range(len(uniq)), key=lambda k: (-int(counts[k]), int(uniq[k, 0]), int(uniq[k, 1])))
    return [
        ShiftClass(
            shift=(int(uniq[k, 0]), int(uniq[k, 1])),
            sources=pairs.sources[groups[k]],
            targets=pairs.targets[groups[k]],
        )
        for k in order
    ]


def shift_magnitude(shift: Shift, metric: Th1Metric = Th1Metric.CHEBYSHEV) -> int:
    dx, dy = shift
    if Th1Metric(metric) is Th1Metric.ABS_DIFF:
        return abs(dx - dy)
    return max(abs(dx), abs(dy))


def on_grid(shift: Shift, period: int = JPEG_GRID) -> bool:
    return shift[0] % period == 0 and shift[1] % period == 0


def apply_thresholds(
    classes: Sequence[ShiftClass],
    th1: int = 10,
    th2: int = 100,
    metric: Th1Metric = Th1Metric.CHEBYSHEV,
    exclude_grid: bool = False
) -> List[ShiftClass]:
    """Keep classes with shift magnitude >= th1 and Nc >= th2.

    With ``exclude_grid`` shifts lying on the JPEG block grid in both axes
    are dropped as well.
    """
    if th1 < 0 or th2 < 1:
        raise ValueError(f"Thresholds need th1 >= 0 and th2 >= 1, got th1={th1}, th2={th2}")
    return [
        c for c in classes
        if shift_magnitude(c.shift, metric) >= th1 and c.count >= th2
        and not (exclude_grid and on_grid(c.shift))
    ]


def _paint_windows(origins: np.ndarray, b: int, dims: Tuple[int, int]) -> np.ndarray:
    """Union of b x b squares at the given origins, via a 2D difference array."""
    rows, cols = dims
    diff = np.zeros((rows + 1, cols + 1), dtype=np.int64)
    if len(origins):
        r, c = origins[:, 0], origins[:, 1]
        np.add.at(diff, (r, c), 1)
        np.add.at(diff, (r, c + b), -1)
        np.add.at(diff, (r + b, c), -1)
        np.add.at(diff, (r + b, c + b), 1)
    cover = diff.cumsum(axis=0).cumsum(axis=1)[:rows, :cols]
    return cover > 0


def render_masks(
    accepted: Sequence[ShiftClass],
    b: int,
    dims: Tuple[int, int]
) -> Tuple[BinaryMask, BinaryMask]:
    """Source and destination masks before closing."""
    if accepted:
        sources = np.concatenate([c.sources for c in accepted])
        targets = np.concatenate([c.targets for c in accepted])
    else:
        sources = targets = np.zeros((0, 2), dtype=np.int64)
    return BinaryMask(_paint_windows(sources, b, dims)), BinaryMask(_paint_windows(targets, b, dims))


class StageClock:
    """Per-stage wall time in ms; repeated stages accumulate."""

    def __init__(self) -> None:
        self.timing: Dict[str, float] = {}
        self._last = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        self.timing[stage] = self.timing.get(stage, 0.0) + (now - self._last) * 1000.0
        self._last = now


def detect_from_matrix(
    t: FeatureMatrix,
    dims: Tuple[int, int],
    cfg: DetectorConfig,
    clock: Optional[StageClock] = None,
    window: Optional[int] = None,
    th2: Optional[int] = None,
    rung: int = 0,
    exclude_grid: bool = False
) -> DetectionResult:
    """Sort, match, classify, render and close, starting from matrix T.

    ``window`` and ``th2`` override the configured values; ``rung`` is
    recorded on the result.
    """
    clock = clock or StageClock()
    blocks = len(t)
    th2 = cfg.effective_th2(blocks) if th2 is None else th2
    if blocks < th2:
        raise ImageTooSmall(
            f"Image yields {blocks} blocks, fewer than TH2={th2}",
            details={"blocks": blocks, "th2": th2}
        )

    sorted_t = sort_rows(t)
    clock.lap("sort")
    pairs = find_pairs(sorted_t, cfg.window if window is None else window)
    clock.lap("match")
    classes = classify_shifts(pairs)
    accepted = apply_thresholds(classes, cfg.th1, th2, cfg.th1_metric, exclude_grid)
    clock.lap("classify")
    raw_source, raw_dest = render_masks(accepted, cfg.block_size, dims)
    clock.lap("render")
    se = StructuringElement.square(cfg.se_size)
    source_mask, dest_mask = close(raw_source, se), close(raw_dest, se)
    clock.lap("morphology")
    clock.timing["total"] = sum(v for k, v in clock.timing.items() if k != "total")

    return DetectionResult(
        source_mask=source_mask,
        dest_mask=dest_mask,
        accepted=accepted,
        timing=clock.timing,
        raw_source_mask=raw_source,
        raw_dest_mask=raw_dest,
        blocks=blocks,
        effective_th2=th2,
        config=cfg,
        rung=rung,
    )


def build_feature_matrix(luma: LumaImage, cfg: DetectorConfig) -> FeatureMatrix:
    """Quantized C1..C4 of every block, in row-major origin order."""
    grid = block_grid(luma, cfg.block_size)
    features = extract_features(luma, cfg.block_size, threads=cfg.threads)
    return FeatureMatrix(quantize_features(features, cfg.s12, cfg.s34), grid.origins, features)


def detect(img: RgbImage, cfg: Optional[DetectorConfig] = None) -> DetectionResult:
    """The full intensity-invariant pipeline on an RGB image.

    When the configured steps accept no class, the coarse rungs are tried
    in order with ``coarse_window``, stopping at the first that accepts one.
    A rung's TH2 is its own floor (``th2`` unless the rung names one),
    area-scaled but never below the floor; rungs whose floor is below
    ``th2`` also drop shifts on the JPEG grid. Rungs needing more pairs
    than the image has blocks are skipped. An image no rung flags is
    reported with the result of the configured steps.
    """
    cfg = cfg or DetectorConfig()
    clock = StageClock()
    luma = to_luma(img)
    clock.lap("luma")
    t = build_feature_matrix(luma, cfg)
    clock.lap("features")
    first = result = detect_from_matrix(t, luma.shape, cfg, clock)

    for rung, step in enumerate(cfg.coarse_ladder, start=1):
        if result.forged:
            break
        floor = cfg.th2 if step.th2 is None else step.th2
        th2 = max(cfg.effective_th2(len(t), floor), floor)
        if len(t) < th2:
            continue
        coarse = FeatureMatrix(quantize_features(t.features, step.s12, step.s34), t.origins, t.features)
        clock.lap("features")
        result = detect_from_matrix(
            coarse, luma.shape, cfg, clock,
            window=cfg.coarse_window, th2=th2, rung=rung, exclude_grid=floor < cfg.th2
        )
        app_logger.debug(
            f"Coarse rung {rung} (s12={step.s12}, s34={step.s34}, th2={th2}) "
            f"accepted {len(result.accepted)} class(es)"
        )
    return result if result.forged else first
