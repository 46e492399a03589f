"""
Pydantic models for the application.
"""

from .detection_models import (
    DetectionMethod,
    Th1Metric,
    DetectorConfig,
    ShiftClassSummary,
    DetectionResponse,
    ErrorResponse
)

from .forgery_models import (
    ForgerySpec,
    DegradeSpec
)

from .eval_models import (
    EvalReport,
    SweepCell,
    AggregateRow,
    SweepReport
)

__all__ = [
    # Detection models
    "DetectionMethod",
    "Th1Metric",
    "DetectorConfig",
    "ShiftClassSummary",
    "DetectionResponse",
    "ErrorResponse",

    # Forgery models
    "ForgerySpec",
    "DegradeSpec",

    # Evaluation models
    "EvalReport",
    "SweepCell",
    "AggregateRow",
    "SweepReport"
]
