"""
Binary checkpoints.

Layout (integers little-endian):
    magic "AWNCKPT1" | u32 version | u32 metadata length | metadata (UTF-8 key=value lines)
    | u32 tensor count | per tensor: u32 name length, name, u8 dtype code, u8 rank,
    rank × u32 extents, raw little-endian payload

Tensors cover model parameters, every BN running statistic and the optimizer
velocity (prefixed ``optim.velocity.``). Nothing time-dependent is written,
so identical runs give identical files.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config.settings import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from src.models.lenet import ModelVariant, build_lenet3c1l
from src.training.optim import SgdState
from src.utils.errors import CheckpointError

logger = logging.getLogger(__name__)

VELOCITY_PREFIX = "optim.velocity."
DTYPE_CODES = {np.dtype(np.float32): 1, np.dtype(np.float64): 2, np.dtype(np.int64): 3}
CODE_DTYPES = {code: dtype for dtype, code in DTYPE_CODES.items()}


@dataclass
class Checkpoint:
    model: object
    metadata: dict
    sgd_state: SgdState


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def model_metadata(model) -> dict:
    return {
        "variant": model.kind,
        "width_multiplier": float(model.variant.width_multiplier),
        "base_channels": model.variant.base_channels,
        "in_channels": model.in_channels,
        "num_classes": model.num_classes,
        "input_size": model.input_size,
        "widths": list(model.trained_widths),
        "seed": model.seed,
        "dtype": np.dtype(model.dtype).name,
    }


def _pack_tensor(name: str, array: np.ndarray) -> bytes:
    dtype = np.dtype(array.dtype)
    if dtype not in DTYPE_CODES:
        raise CheckpointError(f"{name}: unsupported dtype {dtype}")
    encoded = name.encode("utf-8")
    header = struct.pack("<I", len(encoded)) + encoded
    header += struct.pack("<BB", DTYPE_CODES[dtype], array.ndim)
    header += struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=dtype.newbyteorder("<")).tobytes()


def save_checkpoint(path, model, sgd_state: SgdState = None, **extra) -> Path:
    """Write ``model`` (and optional optimizer state) to ``path``; ``extra`` lands in the metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {**model_metadata(model), **extra}
    meta_bytes = "".join(f"{k}={_format_value(v)}\n" for k, v in metadata.items()).encode("utf-8")

    tensors = model.state_dict()
    if sgd_state is not None:
        for name, v in sgd_state.velocity.items():
            tensors[VELOCITY_PREFIX + name] = v

    parts = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(meta_bytes)), meta_bytes,
             struct.pack("<I", len(tensors))]
    parts.extend(_pack_tensor(name, tensors[name]) for name in sorted(tensors))
    path.write_bytes(b"".join(parts))
    logger.info(f"Saved checkpoint {path} ({len(tensors)} tensors)")
    return path


class _Reader:
    def __init__(self, raw: bytes, path):
        self.raw, self.pos, self.path = raw, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise CheckpointError(f"{self.path}: truncated at byte {self.pos} (needed {n} more)")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def _parse_metadata(text: str) -> dict:
    metadata = {}
    for line in text.splitlines():
        if line:
            key, _, value = line.partition("=")
            metadata[key] = value
    return metadata


def read_checkpoint(path):
    """Raw contents: (metadata dict of strings, tensor dict)."""
    raw = Path(path).read_bytes()
    reader = _Reader(raw, path)
    magic = reader.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    version = reader.u32()
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    metadata = _parse_metadata(reader.take(reader.u32()).decode("utf-8"))

    tensors = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        code, rank = struct.unpack("<BB", reader.take(2))
        if code not in CODE_DTYPES:
            raise CheckpointError(f"{path}: tensor {name} has unknown dtype code {code}")
        shape = struct.unpack(f"<{rank}I", reader.take(4 * rank))
        dtype = CODE_DTYPES[code].newbyteorder("<")
        payload = reader.take(int(np.prod(shape, dtype=np.int64)) * dtype.itemsize)
        tensors[name] = np.frombuffer(payload, dtype=dtype).reshape(shape).astype(CODE_DTYPES[code])
    if reader.pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - reader.pos} trailing bytes")
    return metadata, tensors


def _floats(value: str) -> list:
    return [float(v) for v in value.split(",") if v]


def load_checkpoint(path) -> Checkpoint:
    """Rebuild the model and optimizer state stored at ``path``."""
    metadata, tensors = read_checkpoint(path)
    try:
        variant = ModelVariant(metadata["variant"], float(metadata["width_multiplier"]),
                               int(metadata["base_channels"]))
        model = build_lenet3c1l(
            variant, int(metadata["in_channels"]), int(metadata["num_classes"]),
            trained_widths=_floats(metadata.get("widths", "")) or None,
            input_size=int(metadata["input_size"]), seed=int(metadata["seed"]),
            dtype=np.dtype(metadata.get("dtype", "float32")).type,
        )
    except KeyError as e:
        raise CheckpointError(f"{path}: metadata is missing {e.args[0]!r}") from None

    velocity = {name[len(VELOCITY_PREFIX):]: t for name, t in tensors.items() if name.startswith(VELOCITY_PREFIX)}
    model.load_state_dict({name: t for name, t in tensors.items() if not name.startswith(VELOCITY_PREFIX)})
    return Checkpoint(model, metadata, SgdState(velocity))


def file_digest(path) -> str:
    """sha256 of the file bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
