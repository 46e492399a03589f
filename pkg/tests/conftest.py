"""
Global test configuration and fixtures.

Provides shared fixtures for all test modules including the test client,
seeded base images, synthesized copy-move forgeries and mask uploads.
"""

import io
from typing import Generator, Optional, Tuple

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from app.main import app
from app.models.detection_models import DetectorConfig
from app.models.forgery_models import ForgerySpec
from app.services.degrade_forge import generate_base_image, synthesize
from app.services.pixel_core import BinaryMask, RgbImage


# Test client fixtures
@pytest.fixture
def client() -> Generator[TestClient, None, None]:
    """Create a test client for the FastAPI application."""
    with TestClient(app) as test_client:
        yield test_client


Forgery = Tuple[RgbImage, BinaryMask, BinaryMask, ForgerySpec]


class ImageGenerator:
    """Utility class for generating test images and forgeries."""

    @staticmethod
    def noise(rows: int = 128, cols: int = 128, seed: int = 0) -> RgbImage:
        """Gray uniform noise in [40, 215]; no two blocks look alike."""
        return generate_base_image(rows, cols, kind="noise", seed=seed)

    @staticmethod
    def texture(rows: int = 128, cols: int = 128, seed: int = 0) -> RgbImage:
        """Tinted multi-octave texture."""
        return generate_base_image(rows, cols, kind="texture", seed=seed)

    @staticmethod
    def flat(rows: int, cols: int, value: int) -> RgbImage:
        return RgbImage.from_gray(np.full((rows, cols), value))

    @staticmethod
    def forgery(
        base: Optional[RgbImage] = None,
        source: Tuple[int, int] = (10, 10),
        dest: Tuple[int, int] = (70, 60),
        size: int = 40,
        delta: int = 20,
        gain: float = 1.0
    ) -> Forgery:
        """Copy a size x size square from ``source`` to ``dest``."""
        base = base if base is not None else ImageGenerator.noise()
        spec = ForgerySpec(
            source_row=source[0], source_col=source[1], height=size, width=size,
            dest_row=dest[0], dest_col=dest[1], intensity_delta=delta, intensity_gain=gain,
        )
        forged, gt_source, gt_dest = synthesize(base, spec)
        return forged, gt_source, gt_dest, spec

    @staticmethod
    def png_bytes(img: RgbImage) -> bytes:
        buffer = io.BytesIO()
        Image.fromarray(img.pixels.copy()).save(buffer, format="PNG")
        return buffer.getvalue()

    @staticmethod
    def mask_png_bytes(mask: BinaryMask) -> bytes:
        buffer = io.BytesIO()
        Image.fromarray(mask.bits.astype(np.uint8) * 255).save(buffer, format="PNG")
        return buffer.getvalue()

    @staticmethod
    def random_mask(rng: np.random.Generator, rows: int = 32, cols: int = 32, density: float = 0.3) -> BinaryMask:
        return BinaryMask(rng.random((rows, cols)) < density)


@pytest.fixture
def image_generator() -> ImageGenerator:
    """Provide access to image generation utilities."""
    return ImageGenerator()


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random generator; every test sees the same stream."""
    return np.random.default_rng(1234)


@pytest.fixture
def noise_image(image_generator: ImageGenerator) -> RgbImage:
    return image_generator.noise()


@pytest.fixture
def noise_forgery(image_generator: ImageGenerator) -> Forgery:
    """128x128 noise image with a 40x40 clone brightened by 20."""
    return image_generator.forgery()


@pytest.fixture
def default_config() -> DetectorConfig:
    return DetectorConfig()


# File upload fixtures
@pytest.fixture
def forged_png_upload(image_generator: ImageGenerator, noise_forgery: Forgery):
    """Multipart tuple for the forged image."""
    return ("forged.png", image_generator.png_bytes(noise_forgery[0]), "image/png")


@pytest.fixture
def invalid_image_upload():
    """Multipart tuple with a .png name but no PNG content."""
    return ("broken.png", b"This is not an image", "image/png")
