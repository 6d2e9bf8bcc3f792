"""Reading and writing grayscale document images.

Images are exchanged with the rest of the package as 2-D float arrays with
intensities in [0, 1], 0.0 being black ink and 1.0 white background.
Supported on disk: PNG (via Pillow) and binary PGM (P5, parsed here).
"""

from __future__ import annotations

import io as _io
import os

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..errors import DataError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_PGM_MAGIC = b"P5"

# ITU-R 601 luma weights, used to collapse RGB scans to grayscale.
_LUMA = (0.299, 0.587, 0.114)


def _load_png(raw: bytes, path: str) -> np.ndarray:
    try:
        with Image.open(_io.BytesIO(raw)) as im:
            im.load()
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif mode == "RGB":
                rgb = np.asarray(im, dtype=np.float64) / 255.0
                arr = _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
            else:
                raise DataError(
                    f"unsupported PNG mode {mode!r} in {path}; expected L or RGB"
                )
    except DataError:
        raise
    except (OSError, UnidentifiedImageError, SyntaxError) as exc:
        raise DataError(f"cannot decode PNG {path}: {exc}") from exc
    return arr


def _load_pgm(raw: bytes, path: str) -> np.ndarray:
    # Header: "P5", width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed, then a single whitespace byte before the
    # raster data.
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(raw):
            raise DataError(f"truncated PGM header in {path}")
        c = raw[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            end = raw.find(b"\n", pos)
            if end == -1:
                raise DataError(f"truncated PGM header in {path}")
            pos = end + 1
        elif c.isdigit():
            start = pos
            while pos < len(raw) and raw[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(raw[start:pos]))
        else:
            raise DataError(f"malformed PGM header in {path}")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise DataError(f"malformed PGM header in {path}")
    pos += 1
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise DataError(f"invalid PGM dimensions {width}x{height} in {path}")
    if not 0 < maxval <= 255:
        raise DataError(
            f"unsupported PGM maxval {maxval} in {path}; expected 1..255"
        )
    data = raw[pos:pos + width * height]
    if len(data) < width * height:
        raise DataError(
            f"truncated PGM data in {path}: expected {width * height} bytes,"
            f" got {len(data)}"
        )
    arr = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    return (arr / maxval).reshape(height, width)


def load_image(path) -> np.ndarray:
    """Load a grayscale image as floats in [0, 1].

    The format is sniffed from the file's magic bytes, not its extension.
    RGB PNGs are converted with the usual 0.299/0.587/0.114 luma weights.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if raw.startswith(_PNG_MAGIC):
        return _load_png(raw, path)
    if raw.startswith(_PGM_MAGIC):
        return _load_pgm(raw, path)
    raise DataError(f"unrecognized image format in {path}; expected PNG or PGM")


def save_image(path, image: np.ndarray) -> None:
    """Write a [0, 1] grayscale image as PNG or PGM, chosen by extension."""
    path = os.fspath(path)
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise DataError(f"save_image expects a 2-D image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise DataError(f"refusing to save non-finite pixel values to {path}")
    quantized = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".png":
        Image.fromarray(quantized, mode="L").save(path, format="PNG")
    elif ext == ".pgm":
        h, w = quantized.shape
        header = f"P5\n{w} {h}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(quantized.tobytes())
    else:
        raise DataError(f"unsupported image extension {ext!r} for {path}")
