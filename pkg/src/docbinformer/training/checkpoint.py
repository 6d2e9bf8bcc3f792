"""Binary checkpoint format for model, optimizer, and RNG state.

Layout, all multi-byte integers little-endian::

    8 bytes   magic "DBFCKPT1"
    u32       format version (currently 1)
    18 x i32  model configuration
    u32       number of model tensors, then for each:
                u16 name length, UTF-8 name, u8 rank, rank x i32 dims,
                raw float32 data
    u32       number of optimizer tensors (same encoding, names prefixed
              "m." and "v." for the first and second Adam moments)
    u64       optimizer step count
    i32       completed epoch count
    u32       length of the RNG state blob, then that many bytes of JSON

Saving the result of a load produces a byte-identical file, which is what
makes resumed runs reproducible bit for bit.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import CheckpointError
from ..model import (
    ModelConfig,
    ModelParams,
    config_from_ints,
    config_to_ints,
    expected_shapes,
)
from .optim import AdamWState

MAGIC = b"DBFCKPT1"
FORMAT_VERSION = 1
_CONFIG_INTS = 18
_MAX_RANK = 8


@dataclass
class Checkpoint:
    """Everything needed to continue a training run exactly."""

    config: ModelConfig
    params: ModelParams
    optimizer: AdamWState
    epoch: int
    rng: np.random.Generator
    version: int = FORMAT_VERSION


def _rng_to_blob(rng: np.random.Generator) -> bytes:
    state = rng.bit_generator.state
    return json.dumps(state, sort_keys=True).encode("utf-8")


def _rng_from_blob(blob: bytes, path: str) -> np.random.Generator:
    try:
        state = json.loads(blob.decode("utf-8"))
        name = state["bit_generator"]
        bit_generator = getattr(np.random, name)()
        bit_generator.state = state
    except (ValueError, KeyError, AttributeError, TypeError) as exc:
        raise CheckpointError(f"invalid RNG state in {path}: {exc}") from exc
    return np.random.Generator(bit_generator)


def _write_tensor(fh, name: str, array: np.ndarray) -> None:
    encoded = name.encode("utf-8")
    if len(encoded) > 0xFFFF:
        raise CheckpointError(f"tensor name too long: {name!r}")
    if array.ndim > _MAX_RANK:
        raise CheckpointError(f"tensor rank {array.ndim} too large for {name!r}")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<B", array.ndim))
    fh.write(struct.pack(f"<{array.ndim}i", *array.shape))
    fh.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def save_checkpoint(path, params: ModelParams, optimizer: AdamWState,
                    epoch: int, rng: np.random.Generator) -> None:
    """Write a complete training snapshot. Tensors are stored as float32."""
    path = os.fspath(path)
    names = list(expected_shapes(params.config))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack(f"<{_CONFIG_INTS}i", *config_to_ints(params.config)))
        fh.write(struct.pack("<I", len(names)))
        for name, tensor, _ in params.named():
            _write_tensor(fh, name, tensor.data)
        fh.write(struct.pack("<I", 2 * len(names)))
        for name in names:
            _write_tensor(fh, "m." + name, optimizer.m[name])
            _write_tensor(fh, "v." + name, optimizer.v[name])
        fh.write(struct.pack("<Q", optimizer.step))
        fh.write(struct.pack("<i", epoch))
        blob = _rng_to_blob(rng)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


class _Reader:
    """Strict byte reader that turns any shortfall into CheckpointError."""

    def __init__(self, raw: bytes, path: str):
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if end > len(self.raw):
            raise CheckpointError(
                f"truncated checkpoint {self.path}: wanted {count} bytes at"
                f" offset {self.pos}, file has {len(self.raw)}"
            )
        chunk = self.raw[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def done(self) -> None:
        if self.pos != len(self.raw):
            raise CheckpointError(
                f"trailing data in checkpoint {self.path}:"
                f" {len(self.raw) - self.pos} unread bytes"
            )


def _read_tensor(reader: _Reader) -> tuple:
    (name_len,) = reader.unpack("<H")
    name = reader.take(name_len).decode("utf-8")
    (rank,) = reader.unpack("<B")
    if rank > _MAX_RANK:
        raise CheckpointError(
            f"tensor {name!r} in {reader.path} has implausible rank {rank}"
        )
    shape = reader.unpack(f"<{rank}i") if rank else ()
    if any(dim <= 0 for dim in shape):
        raise CheckpointError(
            f"tensor {name!r} in {reader.path} has invalid shape {shape}"
        )
    count = int(np.prod(shape, dtype=np.int64)) if shape else 1
    data = np.frombuffer(reader.take(4 * count), dtype="<f4")
    return name, data.reshape(shape).astype(np.float32)


def _read_tensor_section(reader: _Reader, expected: dict, kind: str) -> dict:
    (count,) = reader.unpack("<I")
    if count != len(expected):
        raise CheckpointError(
            f"{kind} section of {reader.path} has {count} tensors,"
            f" expected {len(expected)}"
        )
    arrays = {}
    for _ in range(count):
        name, array = _read_tensor(reader)
        if name not in expected:
            raise CheckpointError(
                f"unexpected {kind} tensor {name!r} in {reader.path}"
            )
        if name in arrays:
            raise CheckpointError(
                f"duplicate {kind} tensor {name!r} in {reader.path}"
            )
        if array.shape != tuple(expected[name]):
            raise CheckpointError(
                f"{kind} tensor {name!r} in {reader.path} has shape"
                f" {array.shape}, expected {tuple(expected[name])}"
            )
        arrays[name] = array
    return arrays


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint written by ``save_checkpoint``."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    reader = _Reader(raw, path)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic bytes)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} in {path};"
            f" this build reads version {FORMAT_VERSION}"
        )
    config = config_from_ints(reader.unpack(f"<{_CONFIG_INTS}i"))
    shapes = expected_shapes(config)
    param_arrays = _read_tensor_section(reader, shapes, "model")
    moment_shapes = {}
    for name, shape in shapes.items():
        moment_shapes["m." + name] = shape
        moment_shapes["v." + name] = shape
    moment_arrays = _read_tensor_section(reader, moment_shapes, "optimizer")
    (step,) = reader.unpack("<Q")
    (epoch,) = reader.unpack("<i")
    (blob_len,) = reader.unpack("<I")
    rng = _rng_from_blob(reader.take(blob_len), path)
    reader.done()
    params = ModelParams.from_arrays(config, param_arrays)
    optimizer = AdamWState.from_arrays(
        {name: moment_arrays["m." + name] for name in shapes},
        {name: moment_arrays["v." + name] for name in shapes},
        step,
    )
    return Checkpoint(config, params, optimizer, epoch, rng, version)
