"""Cutting large images into fixed-size tiles and reassembling them."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ShapeError


@dataclass
class TileSet:
    """Tiles of one image plus the bookkeeping needed to reassemble it.

    Tiles are row-major over the padded grid; ``offsets`` holds each tile's
    top-left corner in padded coordinates.
    """

    tiles: list
    offsets: list
    original_size: tuple
    tile_size: int
    pad_value: float

    def replace_tiles(self, new_tiles) -> "TileSet":
        """Same geometry, different tile contents (e.g. model outputs)."""
        new_tiles = [np.asarray(t) for t in new_tiles]
        if len(new_tiles) != len(self.tiles):
            raise ShapeError(
                f"expected {len(self.tiles)} tiles, got {len(new_tiles)}"
            )
        for t in new_tiles:
            if t.shape != (self.tile_size, self.tile_size):
                raise ShapeError(
                    f"tile shape {t.shape} does not match size {self.tile_size}"
                )
        return replace(self, tiles=new_tiles)


def tile(image: np.ndarray, size: int = 256, pad_value: float = 1.0) -> TileSet:
    """Cut a grayscale image into ``size`` x ``size`` tiles.

    The right and bottom edges are padded with ``pad_value`` (white, for
    documents) up to the next multiple of the tile size.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeError(f"tile expects a 2-D image, got shape {image.shape}")
    if size <= 0:
        raise ShapeError(f"tile size must be positive, got {size}")
    h, w = image.shape
    if h == 0 or w == 0:
        raise ShapeError(f"cannot tile an empty image of shape {image.shape}")
    padded_h = -(-h // size) * size
    padded_w = -(-w // size) * size
    padded = np.full((padded_h, padded_w), pad_value, dtype=image.dtype)
    padded[:h, :w] = image
    tiles, offsets = [], []
    for y in range(0, padded_h, size):
        for x in range(0, padded_w, size):
            tiles.append(padded[y:y + size, x:x + size].copy())
            offsets.append((y, x))
    return TileSet(tiles, offsets, (h, w), size, float(pad_value))


def untile(tileset: TileSet) -> np.ndarray:
    """Reassemble tiles and crop back to the original size.

    Exact inverse of ``tile``: untile(tile(x)) equals x elementwise.
    """
    h, w = tileset.original_size
    size = tileset.tile_size
    padded_h = -(-h // size) * size
    padded_w = -(-w // size) * size
    first = np.asarray(tileset.tiles[0])
    out = np.zeros((padded_h, padded_w), dtype=first.dtype)
    for t, (y, x) in zip(tileset.tiles, tileset.offsets):
        t = np.asarray(t)
        if t.shape != (size, size):
            raise ShapeError(f"tile shape {t.shape} does not match size {size}")
        out[y:y + size, x:x + size] = t
    return out[:h, :w]
