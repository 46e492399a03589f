"""
Tests for file utility functions.

Tests filename sanitization, image magic-byte detection and upload
validation.
"""

from io import BytesIO

import pytest
from fastapi import UploadFile
from starlette.datastructures import Headers

from app.core.config import settings
from app.core.errors import FileFormatError, FileSizeError
from app.utils.file_utils import detect_image_format, read_image_upload, sanitize_filename

PNG_HEADER = b"\x89PNG\r\n\x1a\n"


def create_upload(filename, content: bytes, content_type: str = "image/png") -> UploadFile:
    """Create an UploadFile for testing."""
    return UploadFile(
        file=BytesIO(content),
        filename=filename,
        headers=Headers({"content-type": content_type})
    )


@pytest.mark.unit
class TestSanitizeFilename:
    """Test filename sanitization."""

    def test_sanitize_valid_filename(self):
        """Test sanitizing a valid filename."""
        assert sanitize_filename("forged.png") == "forged.png"

    def test_sanitize_special_characters(self):
        """Test sanitizing filename with special characters."""
        assert sanitize_filename("my<>image|?.png") == "my__image__.png"

    def test_sanitize_path_traversal(self):
        """Test sanitizing filename with path traversal attempt."""
        assert sanitize_filename("../../../etc/passwd.png") == "passwd.png"

    def test_sanitize_empty_filename(self):
        """Test sanitizing empty filename."""
        result = sanitize_filename("")
        assert result.startswith("upload_")
        assert result.endswith(".png")

    def test_sanitize_unknown_extension(self):
        """Unknown extensions get the default appended."""
        assert sanitize_filename("mask.tiff") == "mask.tiff.png"

    def test_sanitize_long_filename(self):
        """Test sanitizing very long filename."""
        result = sanitize_filename("a" * 300 + ".bmp")
        assert len(result) <= 255
        assert result.endswith(".bmp")


@pytest.mark.unit
class TestDetectImageFormat:
    """Magic-byte detection."""

    @pytest.mark.parametrize("content,fmt", [
        (PNG_HEADER + b"rest", "png"),
        (b"\xff\xd8\xff\xe0rest", "jpeg"),
        (b"BM\x00\x00", "bmp"),
    ])
    def test_known_formats(self, content, fmt):
        assert detect_image_format(content) == fmt

    def test_unknown_header(self):
        with pytest.raises(FileFormatError, match="unrecognised header"):
            detect_image_format(b"GIF89a")


@pytest.mark.unit
class TestReadImageUpload:
    """Upload validation."""

    @pytest.mark.asyncio
    async def test_valid_png(self, image_generator):
        """A real PNG passes and its bytes come back unchanged."""
        content = image_generator.png_bytes(image_generator.flat(8, 8, 100))
        result = await read_image_upload(create_upload("image.png", content))
        assert result == content

    @pytest.mark.asyncio
    async def test_no_filename(self):
        with pytest.raises(FileFormatError, match="No filename provided"):
            await read_image_upload(create_upload(None, PNG_HEADER))

    @pytest.mark.asyncio
    async def test_wrong_extension(self):
        with pytest.raises(FileFormatError, match="Invalid file format"):
            await read_image_upload(create_upload("image.txt", PNG_HEADER))

    @pytest.mark.asyncio
    async def test_wrong_content_type(self):
        with pytest.raises(FileFormatError, match="Invalid content type"):
            await read_image_upload(create_upload("image.png", PNG_HEADER, "text/plain"))

    @pytest.mark.asyncio
    async def test_empty_file(self):
        with pytest.raises(FileFormatError, match="Empty file uploaded"):
            await read_image_upload(create_upload("image.png", b""))

    @pytest.mark.asyncio
    async def test_bad_magic_bytes(self):
        with pytest.raises(FileFormatError, match="unrecognised header"):
            await read_image_upload(create_upload("image.png", b"This is not an image"))

    @pytest.mark.asyncio
    async def test_large_file(self, monkeypatch):
        """Files above MAX_FILE_SIZE raise FileSizeError."""
        monkeypatch.setattr(settings, "MAX_FILE_SIZE", 16)
        with pytest.raises(FileSizeError, match="File too large"):
            await read_image_upload(create_upload("image.png", PNG_HEADER + b"\x00" * 32))
