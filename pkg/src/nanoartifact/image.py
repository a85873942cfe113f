"""8-bit grayscale images: binary PGM I/O and the preprocessing front end.

Images are plain ``numpy`` arrays of dtype ``uint8`` and shape
``(height, width)``; row index first, column index second.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

try:
    import cv2
except ImportError:  # pragma: no cover - scipy gives identical output, ~40x slower
    cv2 = None
    from scipy import ndimage


class ImageError(ValueError):
    """Base class for image-level failures."""


class MalformedHeader(ImageError):
    pass


class UnsupportedMaxval(ImageError):
    pass


class TruncatedPayload(ImageError):
    pass


class CropTooLarge(ImageError):
    pass


class EvenWindow(ImageError):
    pass


class DimensionMismatch(ImageError):
    pass


class EmptyFrameList(ImageError):
    pass


@dataclass(frozen=True)
class PixelScale:
    nm_per_pixel: float = 3.3

    def __post_init__(self):
        if not self.nm_per_pixel > 0:
            raise ValueError(f"nm_per_pixel must be positive, got {self.nm_per_pixel}")


def as_gray(img) -> np.ndarray:
    """Validate ``img`` and return it as a 2-D ``uint8`` array."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ImageError(f"expected a non-empty 2-D image, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ImageError("pixel values must lie in 0..255")
        if np.issubdtype(arr.dtype, np.floating) and not np.all(arr == np.round(arr)):
            raise ImageError("pixel values must be integral")
        arr = arr.astype(np.uint8)
    return arr


# magic, then width, height, maxval; '#' comments may appear between tokens
_TOKEN = re.compile(rb"(?:\s|#[^\n\r]*[\n\r])*([^\s#]+)")


def load_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) PGM with maxval <= 255."""
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MalformedHeader("incomplete PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise MalformedHeader(f"bad magic {fields[0][:8]!r}, expected b'P5'")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise MalformedHeader(f"non-integer header field in {fields[1:]}") from exc
    if width < 1 or height < 1 or maxval < 1:
        raise MalformedHeader(f"invalid header values {width}x{height} maxval={maxval}")
    if maxval > 255:
        raise UnsupportedMaxval(f"maxval {maxval} > 255 is not supported")
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise MalformedHeader("missing whitespace after maxval")
    pos += 1
    n = width * height
    payload = data[pos:pos + n]
    if len(payload) < n:
        raise TruncatedPayload(f"expected {n} pixel bytes, found {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def save_pgm(img) -> bytes:
    img = as_gray(img)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path, img) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(img))


def center_crop(img, size: int) -> np.ndarray:
    img = as_gray(img)
    h, w = img.shape
    if size < 1 or size > w or size > h:
        raise CropTooLarge(f"cannot crop {size}x{size} from {w}x{h}")
    top = (h - size) // 2
    left = (w - size) // 2
    return img[top:top + size, left:left + size].copy()


def median_filter(img, window: int) -> np.ndarray:
    """Square median filter with clamp-to-edge borders; output shape equals input."""
    img = as_gray(img)
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"median window must be odd and >= 1, got {window}")
    if window == 1:
        return img.copy()
    if cv2 is not None:
        # histogram median for uint8; BORDER_REPLICATE is clamp-to-edge
        return cv2.medianBlur(np.ascontiguousarray(img), window)
    return ndimage.median_filter(img, size=window, mode="nearest")


def frame_average(frames: Sequence) -> np.ndarray:
    """Per-pixel mean of equally sized frames, rounded half-up."""
    if len(frames) == 0:
        raise EmptyFrameList("frame_average needs at least one frame")
    stack = [as_gray(f) for f in frames]
    shape = stack[0].shape
    for f in stack[1:]:
        if f.shape != shape:
            raise DimensionMismatch(f"frame shape {f.shape} differs from {shape}")
    total = np.zeros(shape, dtype=np.int64)
    for f in stack:
        total += f
    n = len(stack)
    # floor(total / n + 1/2) in exact integer arithmetic
    mean = (2 * total + n) // (2 * n)
    return np.clip(mean, 0, 255).astype(np.uint8)


def translate(img, dx: int, dy: int) -> np.ndarray:
    """Move content by ``dx`` columns and ``dy`` rows, replicating edges into the gap.

    ``out[y, x] == img[clip(y - dy), clip(x - dx)]``.
    """
    img = as_gray(img)
    h, w = img.shape
    rows = np.clip(np.arange(h) - dy, 0, h - 1)
    cols = np.clip(np.arange(w) - dx, 0, w - 1)
    return img[np.ix_(rows, cols)]


def preprocess(img, crop: int | None = 512, window: int = 11) -> np.ndarray:
    """Center-crop, then median filter (the order the measurement pipeline uses)."""
    img = as_gray(img)
    if crop is not None:
        img = center_crop(img, crop)
    return median_filter(img, window)
