"""Synthetic degraded document pages with exact ground truth.

The generator draws text-like pen strokes, then degrades them with a strong
horizontal illumination gradient, ink fading, stains, and sensor noise.
The gradient is deep enough that dark background on one side of the page is
darker than faded ink on the other, so no single global threshold can
separate ink from paper; methods that use local context can.
"""

from __future__ import annotations

import os

import numpy as np

from .dataset import DocumentPair
from .io import save_image


def _draw_strokes(height: int, width: int, rng, thickness_range) -> np.ndarray:
    """Binary ink mask (1 = ink) made of wavy horizontal word strokes."""
    mask = np.zeros((height, width), dtype=bool)
    band = max(10, height // 10)
    margin = max(2, width // 32)
    thinnest, thickest = thickness_range
    for baseline in range(band // 2, height - 2, band):
        y = float(baseline)
        x = margin
        while x < width - margin:
            word = int(rng.integers(8, 28))
            for _ in range(word):
                if x >= width - margin:
                    break
                y += float(rng.normal(0.0, 0.6))
                y = float(np.clip(y, baseline - 3, baseline + 3))
                thickness = int(rng.integers(thinnest, thickest + 1))
                y0 = int(round(y))
                mask[max(0, y0):min(height, y0 + thickness), x] = True
                # occasional ascender / descender to vary stroke shapes
                if rng.random() < 0.04:
                    stem = int(rng.integers(3, 6))
                    direction = -1 if rng.random() < 0.5 else 1
                    tip = y0 + direction * stem
                    top, bottom = sorted((y0, tip))
                    mask[max(0, top):min(height, bottom + 1), x] = True
                x += 1
            x += int(rng.integers(3, 9))
    return mask


def synthetic_pair(
    height: int = 256,
    width: int = 256,
    seed: int = 0,
    *,
    year: str = "0000",
    sample_id: str | None = None,
    ink_factor: float = 0.45,
    gradient_depth: float = 0.7,
    noise_level: float = 0.03,
    stain_count: int = 2,
    stroke_thickness: tuple = (1, 2),
) -> DocumentPair:
    """Generate one degraded page and its exact binary ground truth.

    Deterministic for a given seed and parameter set. ``ink_factor`` is the
    fraction of the local background intensity that ink retains;
    ``gradient_depth`` is how much illumination drops at the dark edge;
    ``stroke_thickness`` bounds the pen width in pixels (inclusive).
    """
    rng = np.random.default_rng(seed)
    ink = _draw_strokes(height, width, rng, stroke_thickness)
    ground_truth = np.where(ink, 0.0, 1.0)

    ramp = np.linspace(1.0 - gradient_depth, 1.0, width)[None, :]
    background = np.broadcast_to(ramp, (height, width)).copy()
    degraded = np.where(ink, ink_factor * background, background)

    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(stain_count):
        cx = rng.uniform(0, width)
        cy = rng.uniform(0, height)
        sigma = rng.uniform(height / 8, height / 4)
        amp = rng.uniform(0.12, 0.25)
        blob = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2))
        degraded *= 1.0 - amp * blob

    degraded += rng.normal(0.0, noise_level, size=degraded.shape)
    degraded = np.clip(degraded, 0.0, 1.0)

    if sample_id is None:
        sample_id = f"s{seed:04d}"
    return DocumentPair(sample_id, str(year), degraded, ground_truth)


def write_synthetic_dataset(
    root,
    years=("2016", "2017"),
    samples_per_year: int = 3,
    height: int = 256,
    width: int = 256,
    seed: int = 0,
) -> list:
    """Materialize a synthetic corpus on disk in the standard layout.

    Returns the generated pairs. Useful for exercising the command-line
    tools and the directory loader without real scans.
    """
    root = os.fspath(root)
    pairs = []
    counter = seed
    for year in years:
        degraded_dir = os.path.join(root, str(year), "degraded")
        gt_dir = os.path.join(root, str(year), "gt")
        os.makedirs(degraded_dir, exist_ok=True)
        os.makedirs(gt_dir, exist_ok=True)
        for i in range(samples_per_year):
            pair = synthetic_pair(
                height, width, seed=counter, year=str(year),
                sample_id=f"s{i:04d}",
            )
            counter += 1
            save_image(os.path.join(degraded_dir, f"{pair.sample_id}.png"),
                       pair.degraded)
            save_image(os.path.join(gt_dir, f"{pair.sample_id}.png"),
                       pair.ground_truth)
            pairs.append(pair)
    return pairs
