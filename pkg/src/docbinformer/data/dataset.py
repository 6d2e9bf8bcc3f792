"""Enumerating degraded/ground-truth document pairs from a directory tree.

Expected layout, one directory per competition year::

    root/
      2016/
        degraded/  sample01.png ...
        gt/        sample01.png ...
      2017/
        ...

Degraded and ground-truth files are matched by stem within a year.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .io import load_image

_IMAGE_EXTENSIONS = (".png", ".pgm")


@dataclass
class DocumentPair:
    """One degraded scan together with its binary ground truth."""

    sample_id: str
    year: str
    degraded: np.ndarray
    ground_truth: np.ndarray


def _image_files(directory: str) -> dict:
    """Map stem -> path for the images directly inside ``directory``."""
    found = {}
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() not in _IMAGE_EXTENSIONS:
            continue
        path = os.path.join(directory, name)
        if not os.path.isfile(path):
            continue
        if stem in found:
            raise DataError(
                f"duplicate sample id {stem!r} in {directory}"
            )
        found[stem] = path
    return found


def enumerate_dataset(root) -> list:
    """Collect every pair under ``root``, sorted by year then sample id.

    Ground-truth images are snapped to {0, 1} by thresholding at 0.5.
    Missing counterparts, mismatched sizes, and an empty tree all raise
    DataError.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise DataError(f"dataset root {root} is not a directory")
    years = sorted(
        name for name in os.listdir(root)
        if os.path.isdir(os.path.join(root, name))
    )
    if not years:
        raise DataError(f"dataset root {root} contains no year directories")
    pairs = []
    for year in years:
        degraded_dir = os.path.join(root, year, "degraded")
        gt_dir = os.path.join(root, year, "gt")
        for sub in (degraded_dir, gt_dir):
            if not os.path.isdir(sub):
                raise DataError(f"missing directory {sub}")
        degraded_files = _image_files(degraded_dir)
        gt_files = _image_files(gt_dir)
        missing_gt = sorted(set(degraded_files) - set(gt_files))
        if missing_gt:
            raise DataError(
                f"year {year}: no ground truth for sample {missing_gt[0]!r}"
            )
        missing_degraded = sorted(set(gt_files) - set(degraded_files))
        if missing_degraded:
            raise DataError(
                f"year {year}: no degraded image for sample"
                f" {missing_degraded[0]!r}"
            )
        for sample_id in sorted(degraded_files):
            degraded = load_image(degraded_files[sample_id])
            gt = load_image(gt_files[sample_id])
            if degraded.shape != gt.shape:
                raise DataError(
                    f"year {year} sample {sample_id!r}: degraded shape"
                    f" {degraded.shape} does not match ground truth {gt.shape}"
                )
            gt = np.where(gt >= 0.5, 1.0, 0.0)
            pairs.append(DocumentPair(sample_id, year, degraded, gt))
    return pairs
