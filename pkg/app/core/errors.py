"""
Global error handlers and custom exceptions.

Provides the forensic pipeline's exception hierarchy and centralized
error handling for the FastAPI application.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.exceptions import RequestValidationError
from starlette.exceptions import HTTPException as StarletteHTTPException
import logging
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

class ForensicsError(Exception):
    """Base exception for detection, synthesis, degradation and scoring errors."""

    error_type = "forensics_error"

    def __init__(
        self,
        message: str,
        status_code: int = 422,
        details: Optional[Dict[str, Any]] = None
    ):
        self.message = message
        self.status_code = status_code
        self.details = details or {}
        super().__init__(self.message)

class BlockTooLarge(ForensicsError):
    """Block size exceeds the smaller image dimension."""

    error_type = "block_too_large"

class OutOfBounds(ForensicsError):
    """A block or rectangle reaches outside the image frame."""

    error_type = "out_of_bounds"

class ImageTooSmall(ForensicsError):
    """The image yields fewer blocks than the clone count threshold."""

    error_type = "image_too_small"

class OverlapError(ForensicsError):
    """Source and destination rectangles of a forgery intersect."""

    error_type = "overlap_error"

class CodecError(ForensicsError):
    """JPEG encode/decode or image decoding failed."""

    error_type = "codec_error"

    def __init__(self, message: str, status_code: int = 400, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, status_code=status_code, details=details)

class EmptyGroundTruth(ForensicsError):
    """Scoring requested against empty ground-truth masks."""

    error_type = "empty_ground_truth"

class InvalidImageError(ForensicsError):
    """Pixel raster or mask violates its invariants."""

    error_type = "invalid_image"

class InvalidBlockError(ForensicsError):
    """Block handed to the DCT is not square or smaller than 2x2."""

    error_type = "invalid_block"

class FileSizeError(Exception):
    """Custom exception for file size validation errors."""
    pass

class FileFormatError(Exception):
    """Custom exception for file format validation errors."""
    pass

def setup_exception_handlers(app: FastAPI):
    """Setup global exception handlers for the FastAPI app."""

    @app.exception_handler(ForensicsError)
    async def forensics_error_handler(request: Request, exc: ForensicsError):
        logger.error(f"Forensics error ({exc.error_type}): {exc.message}")
        content: Dict[str, Any] = {
            "error": "Forensics Processing Error",
            "message": exc.message,
            "type": exc.error_type
        }
        if exc.details:
            content["details"] = exc.details
        return JSONResponse(status_code=exc.status_code, content=content)

    @app.exception_handler(FileSizeError)
    async def file_size_error_handler(request: Request, exc: FileSizeError):
        logger.error(f"File size error: {str(exc)}")
        return JSONResponse(
            status_code=413,
            content={
                "error": "File Too Large",
                "message": str(exc),
                "type": "file_size_error"
            }
        )

    @app.exception_handler(FileFormatError)
    async def file_format_error_handler(request: Request, exc: FileFormatError):
        logger.error(f"File format error: {str(exc)}")
        return JSONResponse(
            status_code=400,
            content={
                "error": "Invalid File Format",
                "message": str(exc),
                "type": "file_format_error"
            }
        )

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        logger.error(f"Validation error: {exc.errors()}")
        return JSONResponse(
            status_code=422,
            content={
                "error": "Validation Error",
                "message": "Invalid request data",
                "details": [
                    {"loc": list(err.get("loc", ())), "msg": err.get("msg", "")}
                    for err in exc.errors()
                ],
                "type": "validation_error"
            }
        )

    @app.exception_handler(StarletteHTTPException)
    async def http_error_handler(request: Request, exc: StarletteHTTPException):
        logger.error(f"HTTP error: {exc.status_code} - {exc.detail}")
        return JSONResponse(
            status_code=exc.status_code,
            content={
                "error": "HTTP Error",
                "message": exc.detail,
                "type": "http_error"
            }
        )

    @app.exception_handler(Exception)
    async def general_error_handler(request: Request, exc: Exception):
        logger.error(f"Unexpected error: {str(exc)}", exc_info=True)
        return JSONResponse(
            status_code=500,
            content={
                "error": "Internal Server Error",
                "message": "An unexpected error occurred",
                "type": "internal_error"
            }
        )
