"""
Pydantic documents describing synthesized forgeries and degradations.

Both serialize to flat key-value documents, one per corpus manifest line
or sweep grid point.
"""

import math
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ForgerySpec(BaseModel):
    """A copy-move: source rectangle, destination origin and intensity change."""

    model_config = ConfigDict(frozen=True)

    source_row: int = Field(..., ge=0, description="Top row of the copied region")
    source_col: int = Field(..., ge=0, description="Left column of the copied region")
    height: int = Field(..., ge=1, description="Region height in pixels")
    width: int = Field(..., ge=1, description="Region width in pixels")
    dest_row: int = Field(..., ge=0, description="Top row of the pasted region")
    dest_col: int = Field(..., ge=0, description="Left column of the pasted region")
    intensity_delta: int = Field(0, ge=-255, le=255, description="Additive intensity change")
    intensity_gain: float = Field(1.0, gt=0, description="Multiplicative intensity change")
    seed: int = Field(0, ge=0, description="Seed the forgery was drawn with")

    @property
    def source_rect(self) -> Tuple[int, int, int, int]:
        return self.source_row, self.source_col, self.height, self.width

    @property
    def dest_origin(self) -> Tuple[int, int]:
        return self.dest_row, self.dest_col

    @property
    def offset(self) -> Tuple[int, int]:
        """dest_origin - source origin."""
        return self.dest_row - self.source_row, self.dest_col - self.source_col

    @property
    def expected_shift(self) -> Tuple[int, int]:
        """The offset in canonical orientation, as reported by the matcher."""
        dx, dy = self.offset
        if dx < 0 or (dx == 0 and dy < 0):
            return -dx, -dy
        return dx, dy

    def overlaps(self) -> bool:
        dx, dy = self.offset
        return abs(dx) < self.height and abs(dy) < self.width

    def to_document(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class DegradeSpec(BaseModel):
    """Degradation stages, applied as JPEG, then AWGN, then blur.

    A spec with no stage set is the identity.
    """

    model_config = ConfigDict(frozen=True)

    jpeg_qf: Optional[int] = Field(None, ge=1, le=100, description="JPEG quality factor")
    awgn_snr_db: Optional[float] = Field(None, description="AWGN signal-to-noise ratio in dB")
    blur_size: Optional[int] = Field(None, ge=1, description="Gaussian filter size k")
    blur_sigma: Optional[float] = Field(None, gt=0, description="Gaussian standard deviation")
    seed: int = Field(0, ge=0, description="Noise seed")

    @field_validator("awgn_snr_db")
    @classmethod
    def snr_must_be_finite(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not math.isfinite(v):
            raise ValueError("SNR must be finite")
        return v

    @model_validator(mode="after")
    def blur_needs_both(self) -> "DegradeSpec":
        if (self.blur_size is None) != (self.blur_sigma is None):
            raise ValueError("blur_size and blur_sigma must be given together")
        return self

    @property
    def is_identity(self) -> bool:
        return self.jpeg_qf is None and self.awgn_snr_db is None and self.blur_size is None

    @property
    def label(self) -> str:
        """Grid point label, e.g. ``qf=75+snr=20`` or ``identity``."""
        parts = []
        if self.jpeg_qf is not None:
            parts.append(f"qf={self.jpeg_qf}")
        if self.awgn_snr_db is not None:
            parts.append(f"snr={self.awgn_snr_db:g}")
        if self.blur_size is not None:
            parts.append(f"blur={self.blur_size}x{self.blur_sigma:g}")
        return "+".join(parts) or "identity"

    def with_seed(self, seed: int) -> "DegradeSpec":
        return self.model_copy(update={"seed": seed})

    def to_document(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
