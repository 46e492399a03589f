"""
Binary dilation, erosion and closing.

Set definitions, with B the structuring element given as offsets from its
anchor and A the mask:

* dilation:  z in A (+) B  iff  some b in B has z - b in A
* erosion:   z in A (-) B  iff  every b in B has z + b in A
* closing:   (A (+) B) (-) B

Pixels outside the frame are background (0) for both primitives.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from app.core.errors import InvalidImageError
from app.services.pixel_core import BinaryMask


@dataclass(frozen=True, eq=False)
class StructuringElement:
    """k x k boolean template with an anchor cell (defaults to the centre)."""

    cells: np.ndarray = field(repr=False)
    anchor: Optional[Tuple[int, int]] = None

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise InvalidImageError(f"Structuring element must be a non-empty 2D array, got {cells.shape}")
        if not cells.any():
            raise InvalidImageError("Structuring element needs at least one true cell")
        anchor = self.anchor
        if anchor is None:
            anchor = (cells.shape[0] // 2, cells.shape[1] // 2)
        if not (0 <= anchor[0] < cells.shape[0] and 0 <= anchor[1] < cells.shape[1]):
            raise InvalidImageError(f"Anchor {anchor} outside element of shape {cells.shape}")
        cells = cells.copy()
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "anchor", (int(anchor[0]), int(anchor[1])))

    @classmethod
    def square(cls, k: int = 3) -> "StructuringElement":
        if k < 1:
            raise InvalidImageError(f"Structuring element size must be positive, got {k}")
        return cls(np.ones((k, k), dtype=bool))

    @property
    def offsets(self) -> List[Tuple[int, int]]:
        ar, ac = self.anchor  # type: ignore[misc]
        return [(int(i) - ar, int(j) - ac) for i, j in zip(*np.nonzero(self.cells))]

    @property
    def contains_origin(self) -> bool:
        ar, ac = self.anchor  # type: ignore[misc]
        return bool(self.cells[ar, ac])

    @property
    def radius(self) -> int:
        return max(max(abs(di), abs(dj)) for di, dj in self.offsets)

    def reflect(self) -> "StructuringElement":
        """B-hat = {-b : b in B}."""
        rows, cols = self.cells.shape
        ar, ac = self.anchor  # type: ignore[misc]
        return StructuringElement(self.cells[::-1, ::-1], anchor=(rows - 1 - ar, cols - 1 - ac))


def _origin(se: StructuringElement) -> Tuple[int, int]:
    """ndimage origin placing the element's anchor over the output pixel."""
    rows, cols = se.cells.shape
    ar, ac = se.anchor  # type: ignore[misc]
    return ar - rows // 2, ac - cols // 2


def _dilate_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    return ndimage.binary_dilation(bits, structure=se.cells, origin=_origin(se), border_value=0)


def _erode_bits(bits: np.ndarray, se: StructuringElement) -> np.ndarray:
    return ndimage.binary_erosion(bits, structure=se.cells, origin=_origin(se), border_value=0)


def dilate(a: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(_dilate_bits(a.bits, se))


def erode(a: BinaryMask, se: StructuringElement) -> BinaryMask:
    return BinaryMask(_erode_bits(a.bits, se))


def close(a: BinaryMask, se: StructuringElement) -> BinaryMask:
    """Dilation followed by erosion.

    Evaluated on a canvas padded with background by the element's extent so
    the intermediate dilation is not cut at the frame; the result is cropped
    back. Away from the frame this equals erode(dilate(a)); mask pixels on
    the frame itself are kept rather than eroded, so the result always
    contains ``a``.
    """
    pad = max(se.cells.shape)
    padded = np.pad(a.bits, pad, mode="constant", constant_values=False)
    closed = _erode_bits(_dilate_bits(padded, se), se)
    return BinaryMask(closed[pad:pad + a.rows, pad:pad + a.cols])
