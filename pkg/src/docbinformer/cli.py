"""Command-line interface.

Subcommands::

    train      train a model with leave-one-out splitting by year
    binarize   run a trained model on one image
    eval       score a model or classical baseline on a dataset year
    ablate     train and score the architecture-sweep rows
    baseline   binarize one image with Otsu or Sauvola

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 runtime or numerical error. ``DOCBINFORMER_THREADS`` caps evaluation
parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .data import enumerate_dataset, load_image, save_image
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DocBinFormerError,
    NumericsError,
)
from .metrics import (
    evaluate_dataset,
    mean_report,
    otsu,
    psnr,
    report_csv,
    report_table,
    sauvola,
)
from .model import ABLATION_ROWS, DocBinFormer, ablation_config
from .runconfig import apply_overrides, load_run_config, require
from .training import TrainConfig, leave_one_out_split, load_checkpoint, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _thread_cap() -> int:
    raw = os.environ.get("DOCBINFORMER_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(
            f"DOCBINFORMER_THREADS must be an integer, got {raw!r}"
        ) from exc
    if value < 1:
        raise ConfigError(f"DOCBINFORMER_THREADS must be >= 1, got {value}")
    return value


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE",
                        help="INI run configuration file")
    parser.add_argument("--preset", default="default",
                        choices=("default", "tiny"),
                        help="base configuration before file/flag overrides")
    parser.add_argument("--dataset-root", dest="dataset_root")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--held-out-year", dest="held_out_year")
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--weight-decay", dest="weight_decay", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-steps", dest="max_steps", type=int,
                        help="stop after this many optimizer updates")
    parser.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    parser.add_argument("--tile-size", dest="tile_size", type=int,
                        help="square tile edge; overrides model height/width")
    parser.add_argument("--no-attn-residual", dest="no_attn_residual",
                        action="store_true",
                        help="drop the residual connection around attention")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docbinformer",
        description="Two-level transformer for document image binarization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a binarization model")
    _add_config_arguments(p_train)
    p_train.add_argument("--resume", metavar="CKPT",
                         help="continue from a saved checkpoint")

    p_bin = sub.add_parser("binarize", help="binarize one image with a model")
    p_bin.add_argument("--checkpoint", required=True)
    p_bin.add_argument("input")
    p_bin.add_argument("output")

    p_eval = sub.add_parser("eval", help="score a binarizer on a dataset year")
    source = p_eval.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint")
    source.add_argument("--baseline", choices=("otsu", "sauvola"))
    p_eval.add_argument("--dataset-root", dest="dataset_root", required=True)
    p_eval.add_argument("--year", help="restrict scoring to one year")
    p_eval.add_argument("--csv", metavar="FILE", help="also write CSV here")

    p_abl = sub.add_parser("ablate",
                           help="train and score architecture-sweep rows")
    _add_config_arguments(p_abl)
    p_abl.add_argument("--rows", default=",".join(str(r) for r in ABLATION_ROWS),
                       help="comma-separated row ids (default: all)")

    p_base = sub.add_parser("baseline",
                            help="binarize one image with a classical method")
    p_base.add_argument("--method", required=True, choices=("otsu", "sauvola"))
    p_base.add_argument("--window", type=int, default=25)
    p_base.add_argument("--k", type=float, default=0.2)
    p_base.add_argument("--r", type=float, default=0.5)
    p_base.add_argument("input")
    p_base.add_argument("output")
    return parser


def _load_run(args):
    run = load_run_config(getattr(args, "config", None), preset=args.preset)
    return apply_overrides(run, args)


def _select_pairs(root, year=None):
    pairs = enumerate_dataset(root)
    if year is not None:
        pairs = [p for p in pairs if p.year == str(year)]
        if not pairs:
            raise DataError(f"dataset has no samples for year {year!r}")
    return pairs


def cmd_train(args) -> int:
    run = _load_run(args)
    root = require(run, "dataset_root")
    output_dir = require(run, "output_dir")
    pairs = enumerate_dataset(root)
    if run.held_out_year is not None:
        pairs, held_out = leave_one_out_split(pairs, run.held_out_year)
        print(f"holding out year {run.held_out_year}"
              f" ({len(held_out)} pages), training on {len(pairs)} pages")
    os.makedirs(output_dir, exist_ok=True)
    result = train(
        pairs, run.model, run.training,
        checkpoint_dir=output_dir,
        resume_from=getattr(args, "resume", None),
        epoch_callback=lambda e, loss: print(f"epoch {e} loss {loss:.6f}"),
    )
    log_path = os.path.join(output_dir, "loss_log.csv")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for index, loss in enumerate(result.epoch_losses):
            fh.write(f"{index},{loss!r}\n")
    print(f"wrote {log_path}")
    print(f"final checkpoint: {result.checkpoint_paths[-1]}")
    return EXIT_OK


def _model_from_checkpoint(path) -> DocBinFormer:
    ckpt = load_checkpoint(path)
    return DocBinFormer(ckpt.config, ckpt.params)


def cmd_binarize(args) -> int:
    model = _model_from_checkpoint(args.checkpoint)
    image = load_image(args.input)
    save_image(args.output, model.binarize_image(image))
    print(f"wrote {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.baseline == "otsu":
        binarize = otsu
        label = "otsu"
    elif args.baseline == "sauvola":
        binarize = sauvola
        label = "sauvola"
    else:
        model = _model_from_checkpoint(args.checkpoint)
        binarize = model.binarize_image
        label = args.checkpoint
    pairs = _select_pairs(args.dataset_root, args.year)
    reports = evaluate_dataset(binarize, pairs, max_workers=_thread_cap())
    reports.append(mean_report(reports))
    print(f"binarizer: {label}")
    print(report_table(reports), end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(report_csv(reports))
        print(f"wrote {args.csv}")
    return EXIT_OK


def _parse_rows(raw: str) -> list:
    rows = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            row = int(token)
        except ValueError as exc:
            raise ConfigError(f"invalid ablation row id {token!r}") from exc
        if row not in ABLATION_ROWS:
            raise ConfigError(
                f"unknown ablation row {row}; valid rows are"
                f" {sorted(ABLATION_ROWS)}"
            )
        rows.append(row)
    if not rows:
        raise ConfigError("no ablation rows selected")
    return rows


def cmd_ablate(args) -> int:
    run = _load_run(args)
    root = require(run, "dataset_root")
    year = require(run, "held_out_year")
    rows = _parse_rows(args.rows)
    tile = args.tile_size if args.tile_size is not None else 256
    pairs = enumerate_dataset(root)
    train_pairs, held_out = leave_one_out_split(pairs, year)
    print(f"{len(train_pairs)} training pages, {len(held_out)} held-out pages"
          f" (year {year}), tile {tile}")
    results = []
    for row in rows:
        config = ablation_config(row, height=tile, width=tile)
        if not run.model.attn_residual:
            config = dataclasses.replace(config, attn_residual=False)
        result = train(train_pairs, config, run.training)
        model = DocBinFormer(config, result.params)
        scores = [
            psnr(model.binarize_image(p.degraded), p.ground_truth)
            for p in held_out
        ]
        mean_psnr = float(np.mean(scores))
        patch, subpatch, gdim, ldim, glayers, llayers = ABLATION_ROWS[row]
        print(f"row {row}: patch {patch} subpatch {subpatch}"
              f" dims {gdim}/{ldim} layers {glayers}+{llayers}"
              f" psnr {mean_psnr:.2f}")
        results.append((row, mean_psnr))
    best = max(results, key=lambda item: item[1])
    print(f"best row: {best[0]} (psnr {best[1]:.2f})")
    return EXIT_OK


def cmd_baseline(args) -> int:
    image = load_image(args.input)
    if args.method == "otsu":
        binary = otsu(image)
    else:
        binary = sauvola(image, window=args.window, k=args.k, r=args.r)
    save_image(args.output, binary)
    print(f"wrote {args.output}")
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "binarize": cmd_binarize,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "baseline": cmd_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericsError, CheckpointError, DocBinFormerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
