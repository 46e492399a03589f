"""
File handling utilities.

Provides validation functions for uploaded images and masks.
"""

import os
import re
import time
import uuid

from fastapi import UploadFile

from app.core.config import settings
from app.core.errors import FileFormatError, FileSizeError
from app.core.logging import app_logger, get_correlation_id, log_validation_result

IMAGE_SIGNATURES = {
    "png": b"\x89PNG\r\n\x1a\n",
    "jpeg": b"\xff\xd8\xff",
    "bmp": b"BM",
}
ALLOWED_CONTENT_TYPES = {
    "image/png",
    "image/jpeg",
    "image/jpg",
    "image/bmp",
    "image/x-ms-bmp",
    "application/octet-stream",
}


def sanitize_filename(filename: str, default_ext: str = ".png") -> str:
    """Sanitize filename to prevent path traversal and other security issues."""
    if not filename:
        return f"upload_{uuid.uuid4().hex[:8]}{default_ext}"

    filename = os.path.basename(filename)

    # Keep only alphanumeric, dots, hyphens, underscores
    sanitized = re.sub(r'[^a-zA-Z0-9._-]', '_', filename)

    if os.path.splitext(sanitized)[1].lower() not in settings.ALLOWED_EXTENSIONS:
        sanitized = f"{sanitized}{default_ext}"

    if len(sanitized) > 255:
        name, ext = os.path.splitext(sanitized)
        sanitized = f"{name[:250]}{ext}"

    if not sanitized or sanitized.startswith("."):
        sanitized = f"upload_{uuid.uuid4().hex[:8]}{default_ext}"

    app_logger.debug(f"Sanitized filename: '{filename}' -> '{sanitized}'")
    return sanitized


def detect_image_format(content: bytes) -> str:
    """Format name from magic bytes, or raise FileFormatError."""
    for fmt, signature in IMAGE_SIGNATURES.items():
        if content.startswith(signature):
            return fmt
    raise FileFormatError("Invalid image file format - unrecognised header")


async def read_image_upload(file: UploadFile) -> bytes:
    """Validate an uploaded image and return its bytes.

    Checks extension, content type, size and magic bytes, in that order.
    """
    start_time = time.time()
    correlation_id = get_correlation_id()
    filename = file.filename or "unknown"

    try:
        if not file.filename:
            raise FileFormatError("No filename provided")

        file_ext = os.path.splitext(file.filename)[1].lower()
        if file_ext not in settings.ALLOWED_EXTENSIONS:
            raise FileFormatError(f"Invalid file format. Allowed: {settings.ALLOWED_EXTENSIONS}")

        # Content type can be spoofed, so magic bytes are checked too
        if file.content_type and file.content_type not in ALLOWED_CONTENT_TYPES:
            raise FileFormatError(f"Invalid content type: {file.content_type}")

        content = await file.read()

        if len(content) > settings.MAX_FILE_SIZE:
            raise FileSizeError(f"File too large. Max size: {settings.MAX_FILE_SIZE / (1024*1024):.1f}MB")

        if len(content) == 0:
            raise FileFormatError("Empty file uploaded")

        fmt = detect_image_format(content)

        log_validation_result(
            filename=filename,
            is_valid=True,
            validation_time_ms=(time.time() - start_time) * 1000,
            correlation_id=correlation_id
        )
        app_logger.info(f"Successfully validated {fmt} upload: {filename} ({len(content)} bytes)")
        return content

    except (FileFormatError, FileSizeError) as e:
        log_validation_result(
            filename=filename,
            is_valid=False,
            error_message=str(e),
            validation_time_ms=(time.time() - start_time) * 1000,
            correlation_id=correlation_id
        )
        app_logger.warning(f"Image validation failed for {filename}: {str(e)}")
        raise
