"""
Pydantic models for detection scoring and sweep reports.
"""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class EvalReport(BaseModel):
    """Pixel-level accuracy of one detection against ground truth."""

    acc: float = Field(..., ge=0.0, le=1.0, description="True-positive pixels over ground-truth pixels")
    fp: float = Field(..., ge=0.0, description="Spurious pixels over ground-truth pixels")
    detected_pixels: int = Field(..., ge=0, description="|D1| + |D2|")
    true_positive_pixels: int = Field(..., ge=0, description="|R1 ∩ D1| + |R2 ∩ D2|")
    false_positive_pixels: int = Field(..., ge=0, description="Detected pixels outside either truth region")
    truth_pixels: int = Field(..., ge=1, description="|R1| + |R2|")
    swapped: bool = Field(False, description="Whether D1/D2 were swapped to maximise overlap")
    timing_ms: Dict[str, float] = Field(default_factory=dict, description="Per-stage timings")
    config: Dict[str, Any] = Field(default_factory=dict, description="Detector configuration echo")
    degradation: Dict[str, Any] = Field(default_factory=dict, description="Degradation parameters")


class SweepCell(BaseModel):
    """One (image, grid point) cell of a sweep."""

    image_id: str = Field(..., description="Corpus image identifier")
    grid_index: int = Field(..., ge=0, description="Position of the grid point")
    grid_label: str = Field(..., description="Grid point label")
    degradation: Dict[str, Any] = Field(..., description="Degradation parameters")
    acc: float = Field(0.0, description="Accuracy")
    fp: float = Field(0.0, description="False-positive rate")
    detected_pixels: int = Field(0, description="Detected pixels")
    fp_pixels: int = Field(0, description="False-positive pixels")
    accepted_shift: Optional[List[int]] = Field(None, description="Dominant accepted shift")
    expected_shift: List[int] = Field(..., description="Ground-truth canonical shift")
    localized: bool = Field(False, description="Dominant shift within tolerance of the truth")
    rung: int = Field(0, ge=0, description="Quantization rung of the detection; 0 is the configured steps")
    failed: bool = Field(False, description="Cell raised an error")
    error: Optional[str] = Field(None, description="Error message of a failed cell")
    timing_ms: Dict[str, float] = Field(default_factory=dict, description="Per-stage timings")

    def to_record(self) -> Dict[str, Any]:
        """Deterministic record; wall-clock timings are excluded."""
        return self.model_dump(mode="json", exclude={"timing_ms"})


class AggregateRow(BaseModel):
    """Mean ACC/FP over the corpus at one grid point."""

    grid_index: int = Field(..., ge=0, description="Position of the grid point")
    grid_label: str = Field(..., description="Grid point label")
    cells: int = Field(..., ge=0, description="Cells at this grid point")
    failed: int = Field(0, ge=0, description="Failed cells")
    localized: int = Field(0, ge=0, description="Cells with the clone localized")
    mean_acc: float = Field(..., description="Mean accuracy")
    mean_fp: float = Field(..., description="Mean false-positive rate")


class SweepReport(BaseModel):
    """Cells in corpus-major order plus the aggregate table."""

    cells: List[SweepCell] = Field(default_factory=list, description="Per-cell records")
    aggregate: List[AggregateRow] = Field(default_factory=list, description="Per-grid-point means")
    config: Dict[str, Any] = Field(default_factory=dict, description="Detector configuration echo")

    def row(self, label: str) -> AggregateRow:
        for row in self.aggregate:
            if row.grid_label == label:
                return row
        raise KeyError(label)
