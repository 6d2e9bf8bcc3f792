"""Binarization quality measures and per-sample reporting.

All measures take binary images whose values are exactly 0.0 (ink) and
1.0 (background). F-measures are reported in percent.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, ShapeError
from .thinning import thin

#: Highest PSNR reported; returned when prediction and truth are identical.
PSNR_CAP = 100.0


def _check_pair(prediction: np.ndarray, truth: np.ndarray) -> tuple:
    prediction = np.asarray(prediction, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if prediction.ndim != 2 or truth.ndim != 2:
        raise ShapeError(
            f"expected 2-D images, got {prediction.shape} and {truth.shape}"
        )
    if prediction.shape != truth.shape:
        raise ShapeError(
            f"prediction shape {prediction.shape} does not match ground"
            f" truth {truth.shape}"
        )
    for name, image in (("prediction", prediction), ("ground truth", truth)):
        values = np.unique(image)
        if not np.isin(values, (0.0, 1.0)).all():
            raise DataError(
                f"{name} is not binary; found values outside {{0, 1}}"
            )
    return prediction, truth


def psnr(prediction: np.ndarray, truth: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB between two binary images.

    With unit peak intensity the squared error per disagreeing pixel is 1,
    so PSNR reduces to 10 log10(total pixels / disagreeing pixels).
    Identical images return the cap value instead of infinity.
    """
    prediction, truth = _check_pair(prediction, truth)
    wrong = int(np.count_nonzero(prediction != truth))
    if wrong == 0:
        return PSNR_CAP
    return 10.0 * math.log10(prediction.size / wrong)


def confusion(prediction: np.ndarray, truth: np.ndarray) -> tuple:
    """(true positive, false positive, false negative) counts, ink = 0."""
    prediction, truth = _check_pair(prediction, truth)
    pred_ink = prediction == 0.0
    true_ink = truth == 0.0
    tp = int(np.count_nonzero(pred_ink & true_ink))
    fp = int(np.count_nonzero(pred_ink & ~true_ink))
    fn = int(np.count_nonzero(~pred_ink & true_ink))
    return tp, fp, fn


def _harmonic_percent(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def f_measure(prediction: np.ndarray, truth: np.ndarray) -> float:
    """F-measure in percent over ink pixels (value 0)."""
    tp, fp, fn = confusion(prediction, truth)
    if tp + fn == 0:
        raise DataError("ground truth contains no ink pixels")
    if tp == 0:
        return 0.0
    recall = tp / (tp + fn)
    precision = tp / (tp + fp)
    return _harmonic_percent(precision, recall)


def pseudo_f_measure(prediction: np.ndarray, truth: np.ndarray) -> float:
    """F-measure whose recall is taken on the skeleton of the true ink.

    Thinning the ground truth to one-pixel strokes makes recall insensitive
    to stroke width, so slightly thinner predictions are not punished.
    Precision is unchanged.
    """
    prediction, truth = _check_pair(prediction, truth)
    true_ink = truth == 0.0
    if not true_ink.any():
        raise DataError("ground truth contains no ink pixels")
    skeleton = thin(true_ink)
    skeleton_count = int(np.count_nonzero(skeleton))
    if skeleton_count == 0:
        raise DataError("ground truth skeleton is empty")
    pred_ink = prediction == 0.0
    recall = int(np.count_nonzero(pred_ink & skeleton)) / skeleton_count
    tp, fp, _ = confusion(prediction, truth)
    if tp == 0 and recall == 0.0:
        return 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    return _harmonic_percent(precision, recall)


def _reciprocal_distance_weights() -> np.ndarray:
    coords = np.arange(5) - 2
    dist = np.hypot(coords[:, None], coords[None, :])
    with np.errstate(divide="ignore"):
        weights = np.where(dist > 0, 1.0 / dist, 0.0)
    return weights / weights.sum()


_DRD_WEIGHTS = _reciprocal_distance_weights()


def drd(prediction: np.ndarray, truth: np.ndarray) -> float:
    """Distance-reciprocal distortion.

    Each flipped pixel is charged the weighted disagreement between its
    value and the 5x5 ground-truth neighbourhood, weights falling off with
    reciprocal distance (zero at the centre, normalized over the other 24
    cells). Window positions outside the image take the ground-truth value
    of the flipped pixel itself. The sum is divided by the number of
    non-uniform 8x8 ground-truth blocks, counting partial edge blocks.
    """
    prediction, truth = _check_pair(prediction, truth)
    h, w = truth.shape
    nubn = 0
    for by in range(0, h, 8):
        for bx in range(0, w, 8):
            block = truth[by:by + 8, bx:bx + 8]
            if 0 < block.sum() < block.size:
                nubn += 1
    if nubn == 0:
        raise DataError(
            "ground truth has no non-uniform 8x8 block; distortion is undefined"
        )
    total = 0.0
    for y, x in np.argwhere(prediction != truth):
        window = np.full((5, 5), truth[y, x])
        y0, y1 = max(0, y - 2), min(h, y + 3)
        x0, x1 = max(0, x - 2), min(w, x + 3)
        window[y0 - y + 2:y1 - y + 2, x0 - x + 2:x1 - x + 2] = truth[y0:y1, x0:x1]
        total += float(np.sum(_DRD_WEIGHTS * np.abs(prediction[y, x] - window)))
    return total / nubn


@dataclass
class MetricReport:
    """All four quality measures for one sample."""

    sample_id: str
    year: str
    psnr: float
    fm: float
    fps: float
    drd: float


def evaluate_pair(prediction: np.ndarray, pair) -> MetricReport:
    """Score one binarized prediction against its document pair."""
    return MetricReport(
        sample_id=pair.sample_id,
        year=pair.year,
        psnr=psnr(prediction, pair.ground_truth),
        fm=f_measure(prediction, pair.ground_truth),
        fps=pseudo_f_measure(prediction, pair.ground_truth),
        drd=drd(prediction, pair.ground_truth),
    )


def evaluate_dataset(binarize, pairs, max_workers: int = 1) -> list:
    """Binarize and score every pair, preserving input order.

    ``binarize`` maps a degraded image to a binary image. Samples are
    scored concurrently when ``max_workers`` exceeds one.
    """
    pairs = list(pairs)
    if not pairs:
        raise DataError("cannot evaluate an empty list of document pairs")

    def score(pair):
        return evaluate_pair(binarize(pair.degraded), pair)

    if max_workers <= 1:
        return [score(pair) for pair in pairs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(score, pairs))


def mean_report(reports) -> MetricReport:
    """Unweighted average of per-sample reports."""
    reports = list(reports)
    if not reports:
        raise DataError("cannot average an empty list of reports")
    return MetricReport(
        sample_id="mean",
        year="all",
        psnr=float(np.mean([r.psnr for r in reports])),
        fm=float(np.mean([r.fm for r in reports])),
        fps=float(np.mean([r.fps for r in reports])),
        drd=float(np.mean([r.drd for r in reports])),
    )


def report_csv(reports) -> str:
    """Comma-separated report, one row per sample."""
    lines = ["sample_id,year,psnr,fm,fps,drd"]
    for r in reports:
        lines.append(
            f"{r.sample_id},{r.year},{r.psnr:.4f},{r.fm:.4f},"
            f"{r.fps:.4f},{r.drd:.4f}"
        )
    return "\n".join(lines) + "\n"


def report_table(reports) -> str:
    """Fixed-width text table of the same numbers as ``report_csv``."""
    header = f"{'sample':<12} {'year':<6} {'psnr':>8} {'fm':>8} {'fps':>8} {'drd':>8}"
    rows = [header, "-" * len(header)]
    for r in reports:
        rows.append(
            f"{r.sample_id:<12} {r.year:<6} {r.psnr:>8.2f} {r.fm:>8.2f}"
            f" {r.fps:>8.2f} {r.drd:>8.2f}"
        )
    return "\n".join(rows) + "\n"
