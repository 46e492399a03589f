"""
Forgery synthesis and image degradations.

Synthesizes copy-move forgeries with intensity changes on seeded base
images, and applies JPEG recompression, additive white Gaussian noise and
Gaussian blur. Ground-truth masks are never touched by a degradation.
"""

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from app.core.errors import CodecError, OutOfBounds, OverlapError
from app.core.logging import app_logger
from app.models.forgery_models import DegradeSpec, ForgerySpec
from app.services.pixel_core import BinaryMask, RgbImage, to_luma

TEXTURE_OCTAVES = ((0.7, 0.5), (2.0, 0.3), (5.0, 0.2))
TEXTURE_RANGE = (57.5, 197.5)
NOISE_MARGIN = 40
DEFAULT_DELTAS = (-30, -20, -10, 10, 20, 30)
DEFAULT_BLUR_SIZE = 3


@dataclass(frozen=True, eq=False)
class CorpusItem:
    """One synthesized forgery with its ground truth."""

    image_id: str
    forged: RgbImage
    gt_source: BinaryMask
    gt_dest: BinaryMask
    spec: ForgerySpec


def _rng(seed: Union[int, Sequence[int], np.random.SeedSequence]) -> np.random.Generator:
    return np.random.default_rng(seed)


def generate_base_image(
    rows: int = 128,
    cols: int = 128,
    kind: str = "texture",
    seed: Union[int, Sequence[int], np.random.SeedSequence] = 0
) -> RgbImage:
    """Seeded base image.

    ``texture`` sums Gaussian-smoothed noise octaves and adds a small
    per-channel tint; ``noise`` is uniform noise away from the range ends;
    ``flat`` is a single gray level.
    """
    rng = _rng(seed)
    if kind == "texture":
        field = np.zeros((rows, cols))
        for sigma, weight in TEXTURE_OCTAVES:
            octave = ndimage.gaussian_filter(rng.standard_normal((rows, cols)), sigma, mode="wrap")
            spread = octave.std()
            field += weight * (octave / spread if spread > 0 else octave)
        lo, hi = TEXTURE_RANGE
        span = field.max() - field.min()
        gray = lo + (field - field.min()) * ((hi - lo) / span if span > 0 else 0.0)
        tint = rng.integers(-15, 16, size=3)
        pixels = np.floor(gray[:, :, None] + tint[None, None, :] + 0.5)
    elif kind == "noise":
        gray = rng.integers(NOISE_MARGIN, 256 - NOISE_MARGIN, size=(rows, cols))
        return RgbImage.from_gray(gray)
    elif kind == "flat":
        return RgbImage.from_gray(np.full((rows, cols), int(rng.integers(NOISE_MARGIN, 256 - NOISE_MARGIN))))
    else:
        raise ValueError(f"Unknown base image kind: {kind}")
    return RgbImage(np.clip(pixels, 0, 255))


def random_forgery_spec(
    rows: int,
    cols: int,
    region: int = 40,
    deltas: Sequence[int] = DEFAULT_DELTAS,
    seed: int = 0,
    align: int = 1,
    min_shift: int = 10
) -> ForgerySpec:
    """Draw a disjoint, in-frame copy-move.

    Source and destination origins are multiples of ``align``; with
    ``align=8`` both regions sit on the JPEG block grid.
    """
    if region + max(region, min_shift) > max(rows, cols) or region > min(rows, cols):
        raise OutOfBounds(f"A {region}x{region} clone does not fit twice in {rows}x{cols}")
    rng = _rng(seed)
    row_starts = np.arange(0, rows - region + 1, align)
    col_starts = np.arange(0, cols - region + 1, align)
    for _ in range(1000):
        sr, dr = (int(v) for v in rng.choice(row_starts, size=2))
        sc, dc = (int(v) for v in rng.choice(col_starts, size=2))
        if max(abs(dr - sr), abs(dc - sc)) < max(region, min_shift):
            continue
        delta = int(rng.choice(np.asarray(deltas))) if len(deltas) else 0
        return ForgerySpec(
            source_row=sr, source_col=sc, height=region, width=region,
            dest_row=dr, dest_col=dc, intensity_delta=delta, seed=seed,
        )
    raise OutOfBounds(f"No disjoint placement found for a {region}x{region} clone in {rows}x{cols}")


def synthesize(img: RgbImage, spec: ForgerySpec) -> Tuple[RgbImage, BinaryMask, BinaryMask]:
    """Paste clamp(gain * source + delta) at the destination."""
    sr, sc, h, w = spec.source_rect
    dr, dc = spec.dest_origin
    for name, (r, c) in (("source", (sr, sc)), ("destination", (dr, dc))):
        if r + h > img.rows or c + w > img.cols:
            raise OutOfBounds(
                f"{name.capitalize()} rectangle ({r}, {c}, {h}, {w}) outside {img.rows}x{img.cols} image",
                details={"region": name}
            )
    if spec.overlaps():
        raise OverlapError(
            f"Source ({sr}, {sc}) and destination ({dr}, {dc}) rectangles of {h}x{w} intersect"
        )

    pixels = img.pixels.astype(np.float64)
    region = pixels[sr:sr + h, sc:sc + w] * spec.intensity_gain + spec.intensity_delta
    pixels[dr:dr + h, dc:dc + w] = np.clip(np.floor(region + 0.5), 0, 255)

    gt_source = BinaryMask.from_rect(img.rows, img.cols, sr, sc, h, w)
    gt_dest = BinaryMask.from_rect(img.rows, img.cols, dr, dc, h, w)
    return RgbImage(pixels), gt_source, gt_dest


def build_corpus(
    count: int = 20,
    rows: int = 128,
    cols: int = 128,
    region: int = 40,
    deltas: Sequence[int] = DEFAULT_DELTAS,
    seed: int = 0,
    kind: str = "texture",
    align: int = 1,
    threads: int = 1
) -> List[CorpusItem]:
    """Seeded forged corpus; image ``i`` depends only on (seed, i)."""

    def make(index: int) -> CorpusItem:
        spawn = np.random.SeedSequence([seed, index])
        base_seed, spec_seed = spawn.generate_state(2)
        base = generate_base_image(rows, cols, kind, int(base_seed))
        spec = random_forgery_spec(rows, cols, region, deltas, int(spec_seed), align)
        forged, gt_source, gt_dest = synthesize(base, spec)
        return CorpusItem(f"img{index:03d}", forged, gt_source, gt_dest, spec)

    if threads <= 1:
        items = [make(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            items = list(pool.map(make, range(count)))
    app_logger.info(f"Synthesized corpus of {count} {rows}x{cols} forgeries (seed {seed})")
    return items


def manifest_line(image_id: str, spec: ForgerySpec) -> str:
    return json.dumps({"image_id": image_id, **spec.to_document()})


def write_manifest(items: Iterable[CorpusItem], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for item in items:
            handle.write(manifest_line(item.image_id, item.spec) + "\n")


def read_manifest(path: Union[str, Path]) -> List[Tuple[str, ForgerySpec]]:
    entries = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            doc = json.loads(line)
            image_id = doc.pop("image_id")
            entries.append((image_id, ForgerySpec(**doc)))
    return entries


def jpeg_roundtrip(img: RgbImage, qf: int) -> RgbImage:
    """Baseline JFIF encode and decode at quality ``qf`` (4:4:4 sampling)."""
    if not 1 <= int(qf) <= 100:
        raise CodecError(f"JPEG quality factor must be in [1, 100], got {qf}")
    try:
        buffer = io.BytesIO()
        Image.fromarray(img.pixels.copy()).save(buffer, format="JPEG", quality=int(qf), subsampling=0)
        buffer.seek(0)
        with Image.open(buffer) as decoded:
            pixels = np.asarray(decoded.convert("RGB"))
    except (OSError, ValueError) as e:
        raise CodecError(f"JPEG round trip at QF {qf} failed: {str(e)}") from e
    if pixels.shape != img.pixels.shape:
        raise CodecError(f"JPEG round trip changed dimensions {img.pixels.shape} -> {pixels.shape}")
    return RgbImage(pixels)


def signal_power(img: RgbImage) -> float:
    """Mean squared luma value."""
    luma = to_luma(img).pixels
    return float(np.mean(luma * luma))


def noise_sigma(p_signal: float, snr_db: float) -> float:
    return math.sqrt(p_signal / (10.0 ** (snr_db / 10.0)))


def add_awgn(img: RgbImage, snr_db: float, seed: Union[int, Sequence[int]] = 0) -> RgbImage:
    """Add one N(0, sigma^2) field to every channel, then round and clamp."""
    if not math.isfinite(snr_db):
        raise ValueError(f"SNR must be finite, got {snr_db}")
    sigma = noise_sigma(signal_power(img), snr_db)
    noise = _rng(seed).normal(0.0, sigma, size=img.shape)
    pixels = img.pixels.astype(np.float64) + noise[:, :, None]
    return RgbImage(np.clip(np.floor(pixels + 0.5), 0, 255))


def _gaussian_1d(k: int, sd: float) -> np.ndarray:
    x = np.arange(k) - k // 2
    g = np.exp(-(x * x) / (2.0 * sd * sd))
    return g / g.sum()


def gaussian_kernel(k: int, sd: float) -> np.ndarray:
    """Normalized k x k Gaussian, anchored at (k // 2, k // 2)."""
    if k < 1 or sd <= 0:
        raise ValueError(f"Gaussian kernel needs k >= 1 and sd > 0, got k={k}, sd={sd}")
    kernel = np.outer(_gaussian_1d(k, sd), _gaussian_1d(k, sd))
    return kernel / kernel.sum()


def gaussian_blur(img: RgbImage, k: int, sd: float) -> RgbImage:
    """Separable Gaussian filtering with edge replication.

    Applied as a correlation centred on index k // 2, which is the
    convolution for odd k.
    """
    if k < 1 or sd <= 0:
        raise ValueError(f"Gaussian blur needs k >= 1 and sd > 0, got k={k}, sd={sd}")
    weights = _gaussian_1d(k, sd)
    pixels = img.pixels.astype(np.float64)
    pixels = ndimage.correlate1d(pixels, weights, axis=0, mode="nearest")
    pixels = ndimage.correlate1d(pixels, weights, axis=1, mode="nearest")
    return RgbImage(np.clip(np.floor(pixels + 0.5), 0, 255))


def degrade(img: RgbImage, spec: DegradeSpec) -> RgbImage:
    """JPEG, then AWGN, then blur; stages left unset are skipped."""
    out = img
    if spec.jpeg_qf is not None:
        out = jpeg_roundtrip(out, spec.jpeg_qf)
    if spec.awgn_snr_db is not None:
        out = add_awgn(out, spec.awgn_snr_db, spec.seed)
    if spec.blur_size is not None and spec.blur_sigma is not None:
        out = gaussian_blur(out, spec.blur_size, spec.blur_sigma)
    return out


def _parse_axis(axis: str, base_qf: Optional[int]) -> List[DegradeSpec]:
    axis = axis.strip()
    if axis in ("identity", "none"):
        return [DegradeSpec(jpeg_qf=base_qf)]
    key, _, values = axis.partition("=")
    key = key.strip().lower()
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not items:
        raise ValueError(f"Grid axis '{axis}' has no values")
    if key == "qf":
        return [DegradeSpec(jpeg_qf=int(v)) for v in items]
    if key == "snr":
        return [DegradeSpec(jpeg_qf=base_qf, awgn_snr_db=float(v)) for v in items]
    if key == "sd":
        return [
            DegradeSpec(jpeg_qf=base_qf, blur_size=DEFAULT_BLUR_SIZE, blur_sigma=float(v))
            for v in items
        ]
    if key == "blur":
        specs = []
        for v in items:
            size, _, sd = v.lower().partition("x")
            if not sd:
                raise ValueError(f"Blur grid value '{v}' must look like KxSD")
            specs.append(DegradeSpec(jpeg_qf=base_qf, blur_size=int(size), blur_sigma=float(sd)))
        return specs
    raise ValueError(f"Unknown grid axis '{key}'; expected qf, snr, sd, blur or identity")


def parse_grid(text: str, base_qf: Optional[int] = None) -> List[DegradeSpec]:
    """Parse a sweep grid such as ``qf=100,75,50`` or ``identity;snr=20,40``.

    Axes are separated by ``;``; an empty string is an empty grid.
    ``base_qf`` compresses every noise, blur and identity point at that
    quality first.
    """
    grid: List[DegradeSpec] = []
    for axis in text.split(";"):
        if axis.strip():
            grid.extend(_parse_axis(axis, base_qf))
    return grid
