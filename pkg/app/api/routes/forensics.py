"""
Forensics API routes.

Provides endpoints for copy-move clone detection, image degradation and
mask scoring.
"""

import logging
import time
from typing import Any, Dict, Optional

from fastapi import APIRouter, File, Form, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import ValidationError
from starlette.concurrency import run_in_threadpool

from app.core.config import settings
from app.models.detection_models import (
    DetectionMethod,
    DetectionResponse,
    DetectorConfig,
    ErrorResponse,
    Th1Metric
)
from app.models.eval_models import EvalReport
from app.models.forgery_models import DegradeSpec
from app.services.degrade_forge import degrade
from app.services.detection_service import DetectionService
from app.services.evaluation import render_overlay, score
from app.utils.file_utils import read_image_upload, sanitize_filename
from app.utils.image_io import decode_image, decode_mask, encode_image, encode_mask, to_base64

logger = logging.getLogger(__name__)

router = APIRouter()


def _invalid(e: ValidationError) -> RequestValidationError:
    return RequestValidationError(e.errors())


@router.get("/", summary="Forensics Service Status")
async def forensics_service_status():
    """Get forensics service status and available operations."""
    return JSONResponse(
        content={
            "service": "Copy-Move Forensics",
            "status": "ready",
            "operations": [
                "detect - Locate intensity-variant copy-move clones",
                "degrade - Apply JPEG, AWGN and Gaussian blur",
                "score - ACC/FP of detected masks against ground truth"
            ],
            "methods": [m.value for m in DetectionMethod],
            "max_file_size": f"{settings.MAX_FILE_SIZE // (1024 * 1024)}MB",
            "supported_formats": [ext.lstrip(".") for ext in settings.ALLOWED_EXTENSIONS]
        }
    )


@router.post(
    "/detect",
    summary="Detect Copy-Move Clones",
    response_model=DetectionResponse,
    responses={
        400: {"description": "Invalid image file", "model": ErrorResponse},
        413: {"description": "File too large", "model": ErrorResponse},
        422: {"description": "Invalid parameters or block larger than image", "model": ErrorResponse}
    }
)
async def detect_clones(
    file: UploadFile = File(...),
    method: Optional[DetectionMethod] = Form(None, description="Block matcher"),
    block_size: Optional[int] = Form(None, description="Block size b"),
    s12: Optional[float] = Form(None, description="Quantization step for C1, C2"),
    s34: Optional[float] = Form(None, description="Quantization step for C3, C4"),
    window: Optional[int] = Form(None, description="Sorted-row comparison window"),
    th1: Optional[int] = Form(None, description="Minimum shift magnitude"),
    th1_metric: Optional[Th1Metric] = Form(None, description="Shift magnitude metric"),
    th2: Optional[int] = Form(None, description="Minimum pair count at 128x128"),
    scale_th2: Optional[bool] = Form(None, description="Scale TH2 with image size"),
    se_size: Optional[int] = Form(None, description="Closing structuring element size"),
    coarse_steps: Optional[str] = Form(None, description="s12:s34 steps retried when nothing is accepted"),
    coarse_window: Optional[int] = Form(None, description="Comparison window on coarse steps"),
    include_images: bool = Form(True, description="Return base64 PNG masks and overlay")
):
    """Detect duplicated regions, tolerant of intensity changes, in an uploaded image."""
    start_time = time.time()
    content = await read_image_upload(file)
    filename = sanitize_filename(file.filename or "")

    try:
        cfg = DetectorConfig.from_settings(
            method=method, block_size=block_size, s12=s12, s34=s34, window=window,
            th1=th1, th1_metric=th1_metric, th2=th2, scale_th2=scale_th2, se_size=se_size,
            coarse_steps=coarse_steps, coarse_window=coarse_window,
        )
    except ValidationError as e:
        raise _invalid(e)

    img = decode_image(content, filename)
    result = await run_in_threadpool(DetectionService.run, img, cfg, filename)

    images: Dict[str, Any] = {}
    if include_images:
        overlay = render_overlay(img, [result.source_mask, result.dest_mask])
        images = {
            "source_mask_png": to_base64(encode_mask(result.source_mask)),
            "dest_mask_png": to_base64(encode_mask(result.dest_mask)),
            "overlay_png": to_base64(encode_image(overlay)),
        }

    processing_time = (time.time() - start_time) * 1000
    timing = {k: round(v, 3) for k, v in result.timing.items()}
    timing["request"] = round(processing_time, 2)

    response = DetectionResponse(
        status="success",
        message=f"Found {len(result.accepted)} clone class(es)" if result.forged else "No clones detected",
        timing_ms=timing,
        **DetectionService.report_document(result),
        **images,
    )
    return JSONResponse(content=response.model_dump(mode="json"))


@router.post(
    "/degrade",
    summary="Degrade Image",
    responses={
        400: {"description": "Invalid image file", "model": ErrorResponse},
        413: {"description": "File too large", "model": ErrorResponse},
        422: {"description": "Invalid degradation parameters", "model": ErrorResponse}
    }
)
async def degrade_image(
    file: UploadFile = File(...),
    jpeg_qf: Optional[int] = Form(None, description="JPEG quality factor 1-100"),
    awgn_snr_db: Optional[float] = Form(None, description="AWGN SNR in dB"),
    blur_size: Optional[int] = Form(None, description="Gaussian filter size"),
    blur_sigma: Optional[float] = Form(None, description="Gaussian standard deviation"),
    seed: int = Form(0, description="Noise seed")
):
    """Apply JPEG recompression, AWGN and Gaussian blur, in that order; returns a PNG."""
    content = await read_image_upload(file)
    filename = sanitize_filename(file.filename or "")

    try:
        spec = DegradeSpec(
            jpeg_qf=jpeg_qf, awgn_snr_db=awgn_snr_db,
            blur_size=blur_size, blur_sigma=blur_sigma, seed=seed,
        )
    except ValidationError as e:
        raise _invalid(e)

    img = decode_image(content, filename)
    degraded = await run_in_threadpool(degrade, img, spec)
    logger.info(f"Degraded {filename} with {spec.label}")

    stem = filename.rsplit(".", 1)[0]
    return Response(
        content=encode_image(degraded),
        media_type="image/png",
        headers={
            "Content-Disposition": f"attachment; filename={stem}_degraded.png",
            "X-Degradation": spec.label
        }
    )


@router.post(
    "/score",
    summary="Score Detection Masks",
    response_model=EvalReport,
    responses={
        400: {"description": "Invalid mask file", "model": ErrorResponse},
        422: {"description": "Empty ground truth or mismatched mask shapes", "model": ErrorResponse}
    }
)
async def score_masks(
    detected_source: UploadFile = File(..., description="Detected source mask"),
    detected_dest: UploadFile = File(..., description="Detected destination mask"),
    truth_source: UploadFile = File(..., description="Ground-truth source mask"),
    truth_dest: UploadFile = File(..., description="Ground-truth destination mask")
):
    """ACC and FP of detected masks against ground-truth masks."""
    masks = []
    for upload in (detected_source, detected_dest, truth_source, truth_dest):
        content = await read_image_upload(upload)
        masks.append(decode_mask(content, sanitize_filename(upload.filename or "")))

    report = score((masks[0], masks[1]), (masks[2], masks[3]))
    return JSONResponse(content=report.model_dump(mode="json"))
