"""Classical thresholding baselines: global Otsu and local Sauvola."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DataError, ShapeError


def _as_image(image) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {image.shape}")
    if image.size == 0:
        raise ShapeError(f"cannot threshold an empty image of shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise DataError("image contains non-finite values")
    return image


def otsu_level(image: np.ndarray) -> int:
    """The 8-bit split level maximizing between-class variance.

    Pixels are quantized to levels round(p * 255); the lower class is
    level <= t. Ties pick the lowest level. A constant image has no
    separable classes and raises DataError.
    """
    image = _as_image(image)
    levels = np.round(image * 255.0).astype(np.int64)
    if levels.min() < 0 or levels.max() > 255:
        raise DataError("image intensities must lie in [0, 1]")
    histogram = np.bincount(levels.ravel(), minlength=256)
    if np.count_nonzero(histogram) < 2:
        raise DataError("constant image has no threshold")
    total = levels.size
    counts_low = np.cumsum(histogram)
    sums_low = np.cumsum(histogram * np.arange(256))
    counts_high = total - counts_low
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_low = sums_low / counts_low
        mean_high = (sums_low[-1] - sums_low) / counts_high
        score = (counts_low / total) * (counts_high / total) \
            * (mean_low - mean_high) ** 2
    score[(counts_low == 0) | (counts_high == 0)] = 0.0
    return int(np.argmax(score))


def otsu_threshold(image: np.ndarray) -> float:
    """Otsu's level expressed as an intensity cut halfway between levels."""
    return (otsu_level(image) + 0.5) / 255.0


def otsu(image: np.ndarray) -> np.ndarray:
    """Global Otsu binarization: quantized levels at or below the chosen
    level become ink (0.0), the rest background (1.0)."""
    image = _as_image(image)
    level = otsu_level(image)
    levels = np.round(image * 255.0).astype(np.int64)
    return np.where(levels <= level, 0.0, 1.0)


def _clipped_window_sums(values: np.ndarray, half: int) -> tuple:
    """Window sums and element counts over clipped square neighbourhoods,
    via a summed-area table."""
    h, w = values.shape
    table = np.zeros((h + 1, w + 1))
    table[1:, 1:] = np.cumsum(np.cumsum(values, axis=0), axis=1)
    rows = np.arange(h)
    cols = np.arange(w)
    y0 = np.maximum(rows - half, 0)
    y1 = np.minimum(rows + half + 1, h)
    x0 = np.maximum(cols - half, 0)
    x1 = np.minimum(cols + half + 1, w)
    sums = (
        table[np.ix_(y1, x1)]
        - table[np.ix_(y0, x1)]
        - table[np.ix_(y1, x0)]
        + table[np.ix_(y0, x0)]
    )
    counts = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums, counts


def local_stats(image: np.ndarray, window: int) -> tuple:
    """Per-pixel mean and standard deviation over a clipped square window."""
    image = _as_image(image)
    if window < 3 or window % 2 == 0:
        raise ConfigError(f"window must be an odd integer >= 3, got {window}")
    half = window // 2
    sums, counts = _clipped_window_sums(image, half)
    sq_sums, _ = _clipped_window_sums(image * image, half)
    means = sums / counts
    variances = np.maximum(sq_sums / counts - means * means, 0.0)
    return means, np.sqrt(variances)


def sauvola(image: np.ndarray, window: int = 25, k: float = 0.2,
            r: float = 0.5) -> np.ndarray:
    """Sauvola local thresholding.

    Each pixel is compared against t = m (1 + k (s / r - 1)) where m and s
    are the window mean and standard deviation; pixels strictly below t
    become ink (0.0). Windows are clipped at the image borders.
    """
    image = _as_image(image)
    if r <= 0:
        raise ConfigError(f"dynamic range r must be positive, got {r}")
    if k < 0:
        raise ConfigError(f"sensitivity k must be non-negative, got {k}")
    means, stds = local_stats(image, window)
    thresholds = means * (1.0 + k * (stds / r - 1.0))
    return np.where(image < thresholds, 0.0, 1.0)
