"""
Image and mask file I/O.

Images are read with Pillow and converted to 8-bit RGB. Masks are stored as
single-channel PNGs with 255 for set pixels; any value above 127 reads back
as set.
"""

import base64
import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from app.core.errors import CodecError
from app.services.pixel_core import BinaryMask, RgbImage

PathLike = Union[str, Path]

MASK_THRESHOLD = 127
_SAVE_FORMATS = {".png": "PNG", ".bmp": "BMP", ".jpg": "JPEG", ".jpeg": "JPEG"}


def _open(data: bytes, name: str) -> Image.Image:
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
        return image
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise CodecError(f"Cannot decode image {name}: {str(e)}", details={"file": name}) from e


def decode_image(data: bytes, name: str = "image") -> RgbImage:
    with _open(data, name) as image:
        return RgbImage(np.asarray(image.convert("RGB")))


def decode_mask(data: bytes, name: str = "mask") -> BinaryMask:
    with _open(data, name) as image:
        return BinaryMask(np.asarray(image.convert("L")) > MASK_THRESHOLD)


def load_image(path: PathLike) -> RgbImage:
    return decode_image(Path(path).read_bytes(), str(path))


def load_mask(path: PathLike) -> BinaryMask:
    return decode_mask(Path(path).read_bytes(), str(path))


def encode_image(img: RgbImage, fmt: str = "PNG") -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(img.pixels.copy()).save(buffer, format=fmt)
    return buffer.getvalue()


def encode_mask(mask: BinaryMask) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(mask.bits.astype(np.uint8) * 255).save(buffer, format="PNG")
    return buffer.getvalue()


def save_image(img: RgbImage, path: PathLike) -> Path:
    """Write by file suffix; PNG when the suffix is unknown."""
    path = Path(path)
    fmt = _SAVE_FORMATS.get(path.suffix.lower(), "PNG")
    path.write_bytes(encode_image(img, fmt))
    return path


def save_mask(mask: BinaryMask, path: PathLike) -> Path:
    path = Path(path)
    path.write_bytes(encode_mask(mask))
    return path


def to_base64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")
