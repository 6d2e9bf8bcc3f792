"""Morphological skeletonization of binary masks (Zhang-Suen).

Used by the pseudo F-measure, which scores recall on the one-pixel-wide
skeleton of the ground-truth ink instead of on full strokes.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def thin(mask: np.ndarray) -> np.ndarray:
    """Iteratively peel boundary pixels until only the skeleton remains.

    ``mask`` is boolean with True for object pixels. Each pass runs two
    sub-iterations; a pixel is removed when it has 2..6 object neighbours,
    exactly one 0->1 transition around its 8-neighbourhood ring, and the
    directional products for that sub-iteration vanish. Deletions within a
    sub-iteration are applied simultaneously.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"thin expects a 2-D mask, got shape {mask.shape}")
    padded = np.pad(mask.astype(np.uint8), 1)
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            # neighbours P2..P9 clockwise from north, for every interior pixel
            p2 = padded[:-2, 1:-1]
            p3 = padded[:-2, 2:]
            p4 = padded[1:-1, 2:]
            p5 = padded[2:, 2:]
            p6 = padded[2:, 1:-1]
            p7 = padded[2:, :-2]
            p8 = padded[1:-1, :-2]
            p9 = padded[:-2, :-2]
            ring = (p2, p3, p4, p5, p6, p7, p8, p9, p2)
            b = p2.astype(np.int32) + p3 + p4 + p5 + p6 + p7 + p8 + p9
            a = sum(
                ((ring[i] == 0) & (ring[i + 1] == 1)).astype(np.int32)
                for i in range(8)
            )
            if step == 0:
                directional = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                directional = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            interior = padded[1:-1, 1:-1]
            remove = (
                (interior == 1)
                & (b >= 2) & (b <= 6)
                & (a == 1)
                & directional
            )
            if remove.any():
                interior[remove] = 0
                changed = True
    return padded[1:-1, 1:-1].astype(bool)
