"""Quality measures, skeletonization, and classical baselines."""

from .baselines import local_stats, otsu, otsu_level, otsu_threshold, sauvola
from .measures import (
    MetricReport,
    confusion,
    drd,
    evaluate_dataset,
    evaluate_pair,
    f_measure,
    mean_report,
    pseudo_f_measure,
    psnr,
    report_csv,
    report_table,
)
from .thinning import thin

__all__ = [
    "MetricReport",
    "confusion",
    "drd",
    "evaluate_dataset",
    "evaluate_pair",
    "f_measure",
    "local_stats",
    "mean_report",
    "otsu",
    "otsu_level",
    "otsu_threshold",
    "psnr",
    "pseudo_f_measure",
    "report_csv",
    "report_table",
    "sauvola",
    "thin",
]
