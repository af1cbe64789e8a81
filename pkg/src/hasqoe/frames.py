"""Grayscale frame type, binary PGM codec, color conversion, bilinear resize."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FrameFormatError

__all__ = ["GrayFrame", "load_frame", "write_frame", "to_gray", "resize_bilinear"]


@dataclass(frozen=True)
class GrayFrame:
    """Single-channel luminance image.

    ``data`` is a read-only float array of shape (height, width) holding one
    luminance value per pixel in [0, 255]. Values stay real (not quantized)
    so downstream arithmetic keeps full precision.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"frame data must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError("frame contains non-finite pixel values")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 255.0:
            raise ValueError(f"pixel values outside [0, 255]: min={lo}, max={hi}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def pixels(self) -> np.ndarray:
        """Row-major flat view of the pixel values."""
        return self.data.reshape(-1)


def load_frame(path: str | os.PathLike) -> GrayFrame:
    """Decode a binary PGM (magic ``P5``, maxval 255) into a GrayFrame.

    Pixel values equal the file's bytes exactly; no rescaling is applied.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise FrameFormatError(f"frame file not found: {path}") from None
    except OSError as exc:
        raise FrameFormatError(f"cannot read frame file {path}: {exc}") from exc

    magic, pos = _next_token(raw, 0, path)
    if magic != b"P5":
        raise FrameFormatError(f"{path}: bad magic {magic!r}, expected b'P5'")
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(raw, pos, path)
        try:
            value = int(token)
        except ValueError:
            raise FrameFormatError(f"{path}: non-numeric {name} field {token!r}") from None
        if value <= 0:
            raise FrameFormatError(f"{path}: {name} must be positive, got {value}")
        fields.append(value)
    width, height, maxval = fields
    if maxval != 255:
        raise FrameFormatError(f"{path}: unsupported maxval {maxval}, expected 255")
    if width * height > 2**28:
        raise FrameFormatError(f"{path}: dimensions {width}x{height} exceed supported size")
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise FrameFormatError(f"{path}: missing whitespace between header and payload")
    # Exactly one whitespace byte separates the header from the payload.
    payload = raw[pos + 1 :]
    expected = width * height
    if len(payload) < expected:
        raise FrameFormatError(
            f"{path}: truncated pixel payload, expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise FrameFormatError(
            f"{path}: trailing data after pixel payload ({len(payload) - expected} extra bytes)"
        )
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).astype(np.float32)
    return GrayFrame(data)


def write_frame(frame: GrayFrame | np.ndarray, path: str | os.PathLike) -> None:
    """Write a frame as binary PGM. Pixel values are rounded to bytes."""
    data = frame.data if isinstance(frame, GrayFrame) else np.asarray(frame)
    if data.ndim != 2:
        raise ValueError(f"expected 2-D pixel array, got shape {data.shape}")
    height, width = data.shape
    body = np.clip(np.rint(data), 0, 255).astype(np.uint8).tobytes()
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + body)


def _next_token(raw: bytes, pos: int, path: Path) -> tuple[bytes, int]:
    """Scan the next PGM header token, skipping whitespace and # comments.

    Returns the token and the index one past its final byte.
    """
    n = len(raw)
    while pos < n:
        c = raw[pos : pos + 1]
        if c == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FrameFormatError(f"{path}: malformed header, ran out of data")
    start = pos
    while pos < n and not raw[pos : pos + 1].isspace():
        pos += 1
    return raw[start:pos], pos


_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])  # ITU-R BT.601


def to_gray(image: np.ndarray | GrayFrame) -> GrayFrame:
    """Convert an image to a gray map.

    Already-gray input is returned unchanged. 3-channel input (height,
    width, 3) is combined with BT.601 luma weights and kept as real values.
    """
    if isinstance(image, GrayFrame):
        return image
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        return GrayFrame(arr)
    if arr.ndim == 3 and arr.shape[2] == 3:
        gray = arr @ _LUMA_WEIGHTS
        return GrayFrame(gray)
    raise ValueError(f"unsupported image shape {arr.shape}; expected (h, w) or (h, w, 3)")


def resize_bilinear(data: np.ndarray, out_height: int, out_width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping.

    Deterministic pure-numpy implementation so resampled values are
    reproducible across platforms.
    """
    if out_height <= 0 or out_width <= 0:
        raise ValueError("output dimensions must be positive")
    arr = np.asarray(data, dtype=np.float64)
    in_height, in_width = arr.shape
    if (out_height, out_width) == (in_height, in_width):
        return arr.copy()

    ys = np.clip((np.arange(out_height) + 0.5) * in_height / out_height - 0.5, 0, in_height - 1)
    xs = np.clip((np.arange(out_width) + 0.5) * in_width / out_width - 0.5, 0, in_width - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, in_height - 1)
    x1 = np.minimum(x0 + 1, in_width - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    top = arr[np.ix_(y0, x0)] * (1.0 - fx) + arr[np.ix_(y0, x1)] * fx
    bottom = arr[np.ix_(y1, x0)] * (1.0 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy
