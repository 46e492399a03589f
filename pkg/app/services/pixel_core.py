"""
Pixel rasters, luminance conversion, overlapping-block grids and binary masks.

Images are immutable numpy-backed values: an ``RgbImage`` holds a
(rows, cols, 3) uint8 raster, a ``LumaImage`` a (rows, cols) float64 raster.
Width M is the column count and height N the row count; block origins are
(row, col) pairs in row-major order.
"""

from dataclasses import dataclass, field
from typing import Iterator, Tuple

import numpy as np

from app.core.errors import BlockTooLarge, InvalidImageError, OutOfBounds

Origin = Tuple[int, int]

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB raster."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise InvalidImageError(
                f"RGB raster must have shape (rows, cols, 3), got {pixels.shape}"
            )
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise InvalidImageError("Image must be at least 1x1")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise InvalidImageError("Channel values must lie in [0, 255]")
            if np.issubdtype(pixels.dtype, np.floating) and not np.array_equal(
                pixels, np.round(pixels)
            ):
                raise InvalidImageError("Channel values must be integers")
        object.__setattr__(self, "pixels", _readonly(pixels.astype(np.uint8, copy=True)))

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "RgbImage":
        """Build an RGB image from a single channel, R = G = B."""
        gray = np.asarray(gray)
        if gray.ndim != 2:
            raise InvalidImageError(f"Gray raster must be 2D, got {gray.shape}")
        return cls(np.repeat(gray[:, :, None], 3, axis=2))

    @property
    def rows(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def cols(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def width(self) -> int:
        return self.cols

    @property
    def height(self) -> int:
        return self.rows

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RgbImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class LumaImage:
    """Real-valued Y channel; values are not rounded."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise InvalidImageError(f"Luma raster must be a non-empty 2D array, got {pixels.shape}")
        object.__setattr__(self, "pixels", _readonly(pixels.copy()))

    @property
    def rows(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def cols(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols


@dataclass(frozen=True)
class BlockGrid:
    """All b x b windows of an image, sliding by one pixel."""

    block_size: int
    rows: int
    cols: int

    @property
    def grid_shape(self) -> Tuple[int, int]:
        return self.rows - self.block_size + 1, self.cols - self.block_size + 1

    @property
    def origins(self) -> np.ndarray:
        """(R, 2) array of (row, col) origins, row-major."""
        n_r, n_c = self.grid_shape
        rr, cc = np.meshgrid(np.arange(n_r), np.arange(n_c), indexing="ij")
        return np.stack([rr.ravel(), cc.ravel()], axis=1).astype(np.int64)

    def __len__(self) -> int:
        n_r, n_c = self.grid_shape
        return n_r * n_c

    def __iter__(self) -> Iterator[Origin]:
        n_r, n_c = self.grid_shape
        for r in range(n_r):
            for c in range(n_c):
                yield r, c

    def contains(self, origin: Origin) -> bool:
        n_r, n_c = self.grid_shape
        r, c = origin
        return 0 <= r < n_r and 0 <= c < n_c


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel boolean membership (clone region, detection or ground truth)."""

    bits: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise InvalidImageError(f"Mask must be 2D, got {bits.shape}")
        object.__setattr__(self, "bits", _readonly(bits.astype(bool, copy=True)))

    @classmethod
    def empty(cls, rows: int, cols: int) -> "BinaryMask":
        return cls(np.zeros((rows, cols), dtype=bool))

    @classmethod
    def from_rect(cls, rows: int, cols: int, top: int, left: int, height: int, width: int) -> "BinaryMask":
        if top < 0 or left < 0 or top + height > rows or left + width > cols:
            raise OutOfBounds(
                f"Rectangle ({top}, {left}, {height}, {width}) outside {rows}x{cols} frame"
            )
        bits = np.zeros((rows, cols), dtype=bool)
        bits[top:top + height, left:left + width] = True
        return cls(bits)

    @property
    def rows(self) -> int:
        return int(self.bits.shape[0])

    @property
    def cols(self) -> int:
        return int(self.bits.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def require_same_shape(self, other: "BinaryMask") -> None:
        if self.shape != other.shape:
            raise InvalidImageError(f"Mask shapes differ: {self.shape} vs {other.shape}")

    def __and__(self, other: "BinaryMask") -> "BinaryMask":
        self.require_same_shape(other)
        return BinaryMask(self.bits & other.bits)

    def __or__(self, other: "BinaryMask") -> "BinaryMask":
        self.require_same_shape(other)
        return BinaryMask(self.bits | other.bits)

    def __sub__(self, other: "BinaryMask") -> "BinaryMask":
        self.require_same_shape(other)
        return BinaryMask(self.bits & ~other.bits)

    def complement(self) -> "BinaryMask":
        return BinaryMask(~self.bits)

    __invert__ = complement

    def issubset(self, other: "BinaryMask") -> bool:
        self.require_same_shape(other)
        return not np.any(self.bits & ~other.bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.bits, other.bits)

    __hash__ = None  # type: ignore[assignment]


def to_luma(img: RgbImage) -> LumaImage:
    """Luminance Y = 0.299R + 0.587G + 0.114B.

    Evaluated as G + 0.299(R - G) + 0.114(B - G) so gray pixels map to
    themselves exactly and an equal shift of all channels shifts Y by the
    same amount.
    """
    px = img.pixels.astype(np.float64)
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    wr, _, wb = LUMA_WEIGHTS
    return LumaImage(g + wr * (r - g) + wb * (b - g))


def block_grid(img: LumaImage, b: int) -> BlockGrid:
    """Overlapping b x b block grid of an image."""
    if b < 1:
        raise BlockTooLarge(f"Block size must be positive, got {b}")
    if b > min(img.rows, img.cols):
        raise BlockTooLarge(
            f"Block size {b} exceeds image dimensions {img.rows}x{img.cols}",
            details={"block_size": b, "rows": img.rows, "cols": img.cols}
        )
    return BlockGrid(block_size=b, rows=img.rows, cols=img.cols)


def extract_block(img: LumaImage, origin: Origin, b: int) -> np.ndarray:
    """The b x b sub-raster at origin, unmodified."""
    r, c = origin
    if r < 0 or c < 0 or r + b > img.rows or c + b > img.cols or b < 1:
        raise OutOfBounds(
            f"Block at {origin} of size {b} outside {img.rows}x{img.cols} image"
        )
    return img.pixels[r:r + b, c:c + b].copy()


def block_stack(img: LumaImage, b: int) -> np.ndarray:
    """All overlapping blocks as an (R, b, b) array in row-major origin order."""
    grid = block_grid(img, b)
    windows = np.lib.stride_tricks.sliding_window_view(img.pixels, (b, b))
    return windows.reshape(len(grid), b, b)
