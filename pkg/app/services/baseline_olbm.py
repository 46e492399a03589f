"""
Overlapped-block exact matching on raw luma values.

Each block becomes a b*b integer row; rows are sorted and compared with the
same machinery as the DCT feature matcher. Serves as the comparison baseline
and as an oracle on undegraded clones.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core.errors import OutOfBounds
from app.models.detection_models import DetectionMethod, DetectorConfig
from app.services.matcher import (
    DetectionResult,
    FeatureMatrix,
    MatchPairs,
    StageClock,
    canonicalize,
    detect_from_matrix
)
from app.services.pixel_core import LumaImage, Origin, RgbImage, block_grid, to_luma


@dataclass(frozen=True, eq=False)
class RawBlockRow:
    """The b*b rounded luma values of one block, row-major."""

    values: np.ndarray
    origin: Origin

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.int64).ravel()
        side = int(round(np.sqrt(values.size)))
        if side * side != values.size or side < 1:
            raise ValueError(f"Raw block row length {values.size} is not a square")
        object.__setattr__(self, "values", values)

    @property
    def block_size(self) -> int:
        return int(round(np.sqrt(self.values.size)))


def raw_block_matrix(luma: LumaImage, b: int) -> FeatureMatrix:
    """All overlapping blocks as rounded b*b rows, row-major origin order."""
    grid = block_grid(luma, b)
    rounded = np.floor(luma.pixels + 0.5).astype(np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(rounded, (b, b))
    return FeatureMatrix(windows.reshape(len(grid), b * b), grid.origins)


def raw_block_row(luma: LumaImage, origin: Origin, b: int) -> RawBlockRow:
    grid = block_grid(luma, b)
    if not grid.contains(origin):
        raise OutOfBounds(f"Block at {origin} of size {b} outside {luma.rows}x{luma.cols} image")
    r, c = origin
    return RawBlockRow(np.floor(luma.pixels[r:r + b, c:c + b] + 0.5), origin)


def exhaustive_pairs(luma: LumaImage, b: int) -> MatchPairs:
    """Every pair of blocks with identical rounded luma, by hashing whole rows.

    Independent of sorting and of the comparison window, so it enumerates
    pairs among groups of three or more equal blocks as well.
    """
    t = raw_block_matrix(luma, b)
    _, inverse, counts = np.unique(t.values, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    groups = np.split(np.argsort(inverse, kind="stable"), np.cumsum(counts)[:-1])
    firsts, seconds = [], []
    for members in groups:
        if len(members) < 2:
            continue
        i, j = np.triu_indices(len(members), k=1)
        firsts.append(t.origins[members[i]])
        seconds.append(t.origins[members[j]])
    if not firsts:
        return MatchPairs.empty()
    sources, targets = canonicalize(np.concatenate(firsts), np.concatenate(seconds))
    return MatchPairs(sources, targets)


def olbm_detect(
    img: RgbImage,
    b: int = 8,
    th1: int = 10,
    th2: int = 100,
    cfg: Optional[DetectorConfig] = None
) -> DetectionResult:
    """Raw-block pipeline: exact equality of rounded luma blocks.

    ``cfg`` supplies the remaining settings (window, TH1 metric, TH2
    scaling, closing element); ``b``, ``th1`` and ``th2`` override it.
    """
    base = cfg or DetectorConfig()
    cfg = base.model_copy(
        update={"method": DetectionMethod.OLBM, "block_size": b, "th1": th1, "th2": th2}
    )
    clock = StageClock()
    luma = to_luma(img)
    clock.lap("luma")
    t = raw_block_matrix(luma, b)
    clock.lap("features")
    return detect_from_matrix(t, luma.shape, cfg, clock)
