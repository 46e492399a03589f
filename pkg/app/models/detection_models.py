"""
Pydantic models for clone detection.

Defines the detector configuration document and the detection response
returned by the HTTP service.
"""

import math
from enum import Enum
from typing import Any, Dict, List, NamedTuple, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.core.config import settings

# Block count of a 128x128 image with 8x8 blocks; TH2 is calibrated there.
REFERENCE_BLOCKS = 14641


class DetectionMethod(str, Enum):
    """Block matcher used by the pipeline; ``iidmjpeg`` names ``dct``."""
    DCT = "dct"
    OLBM = "olbm"

    @classmethod
    def _missing_(cls, value: object) -> Optional["DetectionMethod"]:
        return METHOD_ALIASES.get(value) if isinstance(value, str) else None


class Th1Metric(str, Enum):
    """Shift magnitude used against TH1; ``paper-absdiff`` names ``abs-diff``."""
    CHEBYSHEV = "chebyshev"
    ABS_DIFF = "abs-diff"

    @classmethod
    def _missing_(cls, value: object) -> Optional["Th1Metric"]:
        return TH1_METRIC_ALIASES.get(value) if isinstance(value, str) else None


# Extra spellings accepted on the command line and in forms.
METHOD_ALIASES = {"iidmjpeg": DetectionMethod.DCT}
TH1_METRIC_ALIASES = {"paper-absdiff": Th1Metric.ABS_DIFF}


class CoarseStep(NamedTuple):
    """One coarse rung: quantization steps and an optional TH2 floor."""
    s12: float
    s34: float
    th2: Optional[int] = None


def parse_coarse_steps(text: str) -> List[CoarseStep]:
    """Parse 's12:s34[:th2],...' into coarse rungs."""
    steps: List[CoarseStep] = []
    for token in filter(None, (t.strip() for t in text.split(","))):
        parts = token.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"Coarse step '{token}' is not of the form s12:s34 or s12:s34:th2")
        try:
            s12, s34 = float(parts[0]), float(parts[1])
            th2 = int(parts[2]) if len(parts) == 3 else None
        except ValueError:
            raise ValueError(f"Coarse step '{token}' has a non-numeric field") from None
        if s12 <= 0 or s34 <= 0 or (th2 is not None and th2 < 1):
            raise ValueError(f"Coarse step '{token}' needs positive steps and TH2")
        steps.append(CoarseStep(s12, s34, th2))
    return steps


class DetectorConfig(BaseModel):
    """Detector parameters, serializable as a flat key-value document."""

    model_config = ConfigDict(frozen=True, use_enum_values=False)

    method: DetectionMethod = Field(DetectionMethod.DCT, description="Block matcher")
    block_size: int = Field(8, ge=2, le=64, description="Block size b in pixels")
    s12: float = Field(2.0, gt=0, description="Quantization step for C1, C2")
    s34: float = Field(0.01, gt=0, description="Quantization step for C3, C4")
    window: int = Field(1, ge=1, le=10, description="Sorted-row comparison window")
    th1: int = Field(10, ge=0, description="Minimum shift magnitude")
    th1_metric: Th1Metric = Field(Th1Metric.CHEBYSHEV, description="Shift magnitude metric")
    th2: int = Field(100, ge=1, description="Minimum pair count per shift class at 128x128")
    scale_th2: bool = Field(True, description="Scale TH2 with the block count of the image")
    se_size: int = Field(3, ge=1, le=31, description="Square structuring element size for closing")
    coarse_steps: str = Field(
        "8:0.2,12:0.2,16:0.2,16:1,24:1,16:1:50,24:1:50",
        description="Comma-separated s12:s34[:th2] steps retried when nothing is accepted; empty disables"
    )
    coarse_window: int = Field(10, ge=1, le=10, description="Comparison window on coarse steps")
    threads: int = Field(1, ge=1, le=64, description="Worker threads for feature extraction")

    @field_validator("coarse_steps")
    @classmethod
    def _check_coarse_steps(cls, v: str) -> str:
        parse_coarse_steps(v)
        return v.replace(" ", "")

    @property
    def coarse_ladder(self) -> List[CoarseStep]:
        """Coarse rungs in the order they are tried."""
        return parse_coarse_steps(self.coarse_steps)

    @classmethod
    def from_settings(cls, **overrides: Any) -> "DetectorConfig":
        """Defaults from application settings, with explicit overrides."""
        values: Dict[str, Any] = {
            "method": settings.METHOD,
            "block_size": settings.BLOCK_SIZE,
            "s12": settings.S12,
            "s34": settings.S34,
            "window": settings.WINDOW,
            "th1": settings.TH1,
            "th1_metric": settings.TH1_METRIC,
            "th2": settings.TH2,
            "scale_th2": settings.SCALE_TH2,
            "se_size": settings.SE_SIZE,
            "coarse_steps": settings.COARSE_STEPS,
            "coarse_window": settings.COARSE_WINDOW,
            "threads": settings.THREADS,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def effective_th2(self, blocks: int, th2: Optional[int] = None) -> int:
        """TH2 (or the given value) for an image with ``blocks`` overlapping blocks."""
        th2 = self.th2 if th2 is None else th2
        if not self.scale_th2:
            return th2
        return max(1, int(math.floor(th2 * blocks / REFERENCE_BLOCKS + 0.5)))

    def to_document(self) -> Dict[str, Any]:
        """Flat key-value form; ``threads`` is an execution detail and omitted."""
        return self.model_dump(mode="json", exclude={"threads"})


class ShiftClassSummary(BaseModel):
    """One accepted shift class."""

    dx: int = Field(..., description="Row shift")
    dy: int = Field(..., description="Column shift")
    count: int = Field(..., description="Matched block pairs Nc")


class DetectionResponse(BaseModel):
    """Response model for clone detection."""

    status: str = Field(..., description="Operation status")
    message: str = Field(..., description="Operation message")
    forged: bool = Field(..., description="Whether any clone class was accepted")
    rows: int = Field(..., description="Image height")
    cols: int = Field(..., description="Image width")
    blocks: int = Field(..., description="Overlapping blocks R")
    effective_th2: int = Field(..., description="TH2 after area scaling")
    rung: int = Field(0, description="0 for the configured steps, k for the k-th coarse step")
    accepted: List[ShiftClassSummary] = Field(..., description="Accepted shift classes")
    source_pixels: int = Field(..., description="Pixels in the source mask")
    dest_pixels: int = Field(..., description="Pixels in the destination mask")
    config: Dict[str, Any] = Field(..., description="Detector configuration echo")
    timing_ms: Dict[str, float] = Field(..., description="Per-stage timings")
    source_mask_png: Optional[str] = Field(None, description="Base64 PNG of the source mask")
    dest_mask_png: Optional[str] = Field(None, description="Base64 PNG of the destination mask")
    overlay_png: Optional[str] = Field(None, description="Base64 PNG of the detection overlay")


class ErrorResponse(BaseModel):
    """Standard error response model."""

    error: str = Field(..., description="Error type")
    message: str = Field(..., description="Error message")
    type: str = Field(..., description="Error category")
    details: Optional[Dict[str, Any]] = Field(None, description="Additional error details")
