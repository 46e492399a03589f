"""
Block DCT and the four-element intensity-robust block feature.

Feature layout for a b x b orthonormal DCT-II block d (0-based indices):

* C1 = d[1, 0], C2 = d[0, 1]
* C3 = sum |d| over the low-frequency triangle i + j <= b - 2, DC excluded,
  divided by sum |d| over every coefficient except DC
* C4 = sum |d| over rows 0 .. ceil(b/2) - 1, DC excluded, over the same
  denominator

Both ratios are 0 when every AC coefficient is 0.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.fft import dctn, idctn

from app.core.errors import InvalidBlockError
from app.services.pixel_core import LumaImage, Origin, block_grid

DEFAULT_S12 = 2.0
DEFAULT_S34 = 0.01


@dataclass(frozen=True, eq=False)
class DctBlock:
    """Orthonormal DCT-II coefficients; index [0, 0] is DC."""

    coefficients: np.ndarray

    @property
    def size(self) -> int:
        return int(self.coefficients.shape[0])


@dataclass(frozen=True)
class FeatureVector:
    c1: float
    c2: float
    c3: float
    c4: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.c1, self.c2, self.c3, self.c4


@dataclass(frozen=True)
class QuantizedFeatureRow:
    """One row of the feature matrix T."""

    q1: int
    q2: int
    q3: int
    q4: int
    origin: Origin = (0, 0)

    @property
    def key(self) -> Tuple[int, int, int, int]:
        return self.q1, self.q2, self.q3, self.q4


def _check_block(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise InvalidBlockError(f"DCT block must be square, got shape {block.shape}")
    if block.shape[0] < 2:
        raise InvalidBlockError(f"DCT block size must be at least 2, got {block.shape[0]}")
    return block


def _dct_stack(blocks: np.ndarray) -> np.ndarray:
    """Orthonormal 2D DCT-II over the last two axes.

    The top-left pixel is subtracted before the transform and restored on
    the DC term: AC coefficients of B and B + c are then bit-identical for
    integer-valued blocks.
    """
    b = blocks.shape[-1]
    ref = blocks[..., :1, :1]
    coeffs = dctn(blocks - ref, type=2, norm="ortho", axes=(-2, -1))
    coeffs[..., 0, 0] += ref[..., 0, 0] * b
    return coeffs


def block_dct(block: np.ndarray) -> DctBlock:
    """Orthonormal 2D DCT-II of one square block."""
    block = _check_block(block)
    return DctBlock(_dct_stack(block))


def inverse_block_dct(d: DctBlock) -> np.ndarray:
    return idctn(d.coefficients, type=2, norm="ortho")


def region_masks(b: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean (b, b) masks: AC coefficients, low-frequency triangle, top rows."""
    i, j = np.indices((b, b))
    ac = ~((i == 0) & (j == 0))
    upper = (i + j <= b - 2) & ac
    top = (i < math.ceil(b / 2)) & ac
    return ac, upper, top


def _feature_stack(coeffs: np.ndarray) -> np.ndarray:
    """(R, b, b) coefficients -> (R, 4) features."""
    b = coeffs.shape[-1]
    ac, upper, top = region_masks(b)
    mags = np.abs(coeffs)
    s_all = np.sum(mags * ac, axis=(-2, -1))
    s_upper = np.sum(mags * upper, axis=(-2, -1))
    s_top = np.sum(mags * top, axis=(-2, -1))
    nonzero = s_all > 0
    c3 = np.divide(s_upper, s_all, out=np.zeros_like(s_all), where=nonzero)
    c4 = np.divide(s_top, s_all, out=np.zeros_like(s_all), where=nonzero)
    return np.stack([coeffs[..., 1, 0], coeffs[..., 0, 1], c3, c4], axis=-1)


def feature_vector(d: DctBlock) -> FeatureVector:
    """C1..C4 of one DCT block."""
    values = _feature_stack(d.coefficients[None, :, :])[0]
    return FeatureVector(*(float(v) for v in values))


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.int64)


def quantize(
    v: FeatureVector,
    s12: float = DEFAULT_S12,
    s34: float = DEFAULT_S34,
    origin: Origin = (0, 0)
) -> QuantizedFeatureRow:
    """Bin the feature vector: q = round(C / step), halves rounded up."""
    if s12 <= 0 or s34 <= 0:
        raise ValueError(f"Quantization steps must be positive, got s12={s12}, s34={s34}")
    q = quantize_features(np.array([v.as_tuple()]), s12, s34)[0]
    return QuantizedFeatureRow(int(q[0]), int(q[1]), int(q[2]), int(q[3]), origin)


def quantize_features(features: np.ndarray, s12: float, s34: float) -> np.ndarray:
    """(R, 4) real features -> (R, 4) int64 rows."""
    steps = np.array([s12, s12, s34, s34], dtype=np.float64)
    return _round_half_up(features / steps)


def extract_features(img: LumaImage, b: int, threads: int = 1, chunk: Optional[int] = None) -> np.ndarray:
    """Feature vectors of every overlapping block, (R, 4), row-major origin order.

    Bands of ``chunk`` grid rows are transformed independently and
    concatenated in order, so the result does not depend on ``threads``.
    """
    if b < 2:
        raise InvalidBlockError(f"DCT block size must be at least 2, got {b}")
    grid = block_grid(img, b)
    windows = np.lib.stride_tricks.sliding_window_view(img.pixels, (b, b))
    n_rows, n_cols = grid.grid_shape
    band = chunk or max(1, 65536 // n_cols)
    bounds = [(start, min(start + band, n_rows)) for start in range(0, n_rows, band)]

    def work(span: Tuple[int, int]) -> np.ndarray:
        blocks = windows[span[0]:span[1]].reshape(-1, b, b)
        return _feature_stack(_dct_stack(blocks))

    if threads <= 1 or len(bounds) == 1:
        parts = [work(span) for span in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    return np.concatenate(parts, axis=0)
