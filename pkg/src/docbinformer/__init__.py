"""DocBinFormer: a two-level vision transformer for document binarization.

The package is organized as:

- ``autodiff``: dense tensors with tape-based reverse-mode differentiation
- ``model``: patch/sub-patch tokenization, the two encoder branches,
  fusion, and the decoding head
- ``training``: MSE objective, AdamW, the epoch loop, checkpoints
- ``data``: image I/O, tiling, dataset trees, synthetic pages
- ``metrics``: PSNR / F-measure / pseudo-F / DRD and the Otsu and Sauvola
  baselines
- ``cli``: the ``docbinformer`` command
"""

from .autodiff import Tape, Tensor
from .data import (
    DocumentPair,
    enumerate_dataset,
    load_image,
    save_image,
    synthetic_pair,
    tile,
    untile,
    write_synthetic_dataset,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DocBinFormerError,
    NumericsError,
    ShapeError,
)
from .metrics import (
    MetricReport,
    drd,
    evaluate_dataset,
    evaluate_pair,
    f_measure,
    mean_report,
    otsu,
    psnr,
    pseudo_f_measure,
    report_csv,
    report_table,
    sauvola,
    thin,
)
from .model import (
    ABLATION_ROWS,
    DocBinFormer,
    ModelConfig,
    ModelParams,
    ablation_config,
    default_config,
    parameter_count,
    tiny_config,
)
from .runconfig import RunConfig, load_run_config
from .training import (
    AdamWState,
    TrainConfig,
    TrainResult,
    adamw_step,
    leave_one_out_split,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_ROWS",
    "AdamWState",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DocBinFormer",
    "DocBinFormerError",
    "DocumentPair",
    "MetricReport",
    "ModelConfig",
    "ModelParams",
    "NumericsError",
    "RunConfig",
    "ShapeError",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainResult",
    "ablation_config",
    "adamw_step",
    "default_config",
    "drd",
    "enumerate_dataset",
    "evaluate_dataset",
    "evaluate_pair",
    "f_measure",
    "leave_one_out_split",
    "load_checkpoint",
    "load_image",
    "load_run_config",
    "mean_report",
    "mse_loss",
    "otsu",
    "parameter_count",
    "psnr",
    "pseudo_f_measure",
    "report_csv",
    "report_table",
    "sauvola",
    "save_checkpoint",
    "save_image",
    "synthetic_pair",
    "thin",
    "tile",
    "tiny_config",
    "train",
    "untile",
    "write_synthetic_dataset",
]
