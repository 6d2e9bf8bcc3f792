"""Image I/O, tiling, dataset enumeration, and synthetic page generation."""

from .dataset import DocumentPair, enumerate_dataset
from .io import load_image, save_image
from .synthetic import synthetic_pair, write_synthetic_dataset
from .tiling import TileSet, tile, untile

__all__ = [
    "DocumentPair",
    "TileSet",
    "enumerate_dataset",
    "load_image",
    "save_image",
    "synthetic_pair",
    "tile",
    "untile",
    "write_synthetic_dataset",
]
