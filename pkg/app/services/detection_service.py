"""
Detection service: method dispatch, structured logging and report documents.
"""

from typing import Any, Dict, List, Optional

from app.core.logging import app_logger, log_detection_operation
from app.models.detection_models import DetectionMethod, DetectorConfig, ShiftClassSummary
from app.services.baseline_olbm import olbm_detect
from app.services.matcher import DetectionResult, detect
from app.services.pixel_core import RgbImage


class DetectionService:
    """Runs the configured detector and describes its result."""

    @staticmethod
    def run(img: RgbImage, cfg: Optional[DetectorConfig] = None, image_id: str = "image") -> DetectionResult:
        """
        Detect copy-move clones in an image.

        Args:
            img: Image to analyse
            cfg: Detector configuration; defaults from settings when omitted
            image_id: Name used in log records

        Returns:
            DetectionResult: closed masks, accepted classes and timings

        Raises:
            ForensicsError: BlockTooLarge or ImageTooSmall from the pipeline
        """
        cfg = cfg or DetectorConfig.from_settings()
        app_logger.debug(f"Running {cfg.method.value} on {image_id} ({img.rows}x{img.cols})")

        if cfg.method is DetectionMethod.OLBM:
            result = olbm_detect(img, cfg.block_size, cfg.th1, cfg.th2, cfg)
        else:
            result = detect(img, cfg)

        log_detection_operation(
            method=cfg.method.value,
            image_id=image_id,
            dims=img.shape,
            blocks=result.blocks,
            accepted_classes=len(result.accepted),
            detected_pixels=result.source_mask.popcount() + result.dest_mask.popcount(),
            timing_ms=result.timing,
            effective_th2=result.effective_th2,
            rung=result.rung,
        )
        return result

    @staticmethod
    def accepted_summary(result: DetectionResult) -> List[ShiftClassSummary]:
        return [
            ShiftClassSummary(dx=c.shift[0], dy=c.shift[1], count=c.count)
            for c in result.accepted
        ]

    @staticmethod
    def report_document(result: DetectionResult) -> Dict[str, Any]:
        """Deterministic description of a detection; timings excluded."""
        rows, cols = result.shape
        return {
            "forged": result.forged,
            "rows": rows,
            "cols": cols,
            "blocks": result.blocks,
            "effective_th2": result.effective_th2,
            "rung": result.rung,
            "accepted": [s.model_dump() for s in DetectionService.accepted_summary(result)],
            "source_pixels": result.source_mask.popcount(),
            "dest_pixels": result.dest_mask.popcount(),
            "config": result.config.to_document(),
        }
