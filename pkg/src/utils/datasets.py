"""
Dataset loading, preprocessing, augmentation and batch iteration.

Supported on-disk formats:
- IDX (MNIST, FashionMNIST), optionally gzip-compressed
- CIFAR-10 binary batches (1 label byte + 3072 planar RGB bytes per record)
"""

import gzip
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config.settings import (
    AUGMENT_PADDING,
    AVAILABLE_DATASETS,
    CIFAR10_DIRNAME,
    CIFAR10_MEAN,
    CIFAR10_STD,
    CIFAR10_TEST_FILES,
    CIFAR10_TRAIN_FILES,
    IDX_FILES,
    MNIST_MEAN,
    MNIST_STD,
)
from src.engine.tensor import Batch
from src.utils.errors import ArgumentError, DataConsistencyError, DataFormatError, DimensionError

logger = logging.getLogger(__name__)

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_IMAGE_SHAPE = (3, 32, 32)
CIFAR_RECORD_BYTES = 1 + 3 * 32 * 32
SPLITS = ("train", "test")


@dataclass(frozen=True)
class Dataset:
    """Images (N, C, H, W) in [0, 1] with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    split: str
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ArgumentError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.images.ndim != 4:
            raise DimensionError(f"dataset images must be NCHW, got {self.images.shape}")
        if len(self.labels) == 0:
            raise DataFormatError(f"dataset {self.name or '<unnamed>'} is empty")
        if len(self.labels) != len(self.images):
            raise DataConsistencyError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise DataFormatError(
                f"labels span [{self.labels.min()}, {self.labels.max()}] for {self.num_classes} classes"
            )

    def __len__(self):
        return len(self.labels)

    @property
    def image_shape(self):
        return self.images.shape[1:]


# ---------------------------------------------------------------------------
# IDX
# ---------------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse_idx_images(raw: bytes, path) -> np.ndarray:
    if len(raw) < 16:
        raise DataFormatError(f"{path}: IDX image header truncated ({len(raw)} bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DataFormatError(f"{path}: image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}")
    expected = count * rows * cols
    if len(raw) - 16 != expected:
        raise DataFormatError(f"{path}: {len(raw) - 16} pixel bytes, header promises {expected}")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, 1, rows, cols)
    return pixels


def _parse_idx_labels(raw: bytes, path) -> np.ndarray:
    if len(raw) < 8:
        raise DataFormatError(f"{path}: IDX label header truncated ({len(raw)} bytes)")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABEL_MAGIC:
        raise DataFormatError(f"{path}: label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}")
    if len(raw) - 8 != count:
        raise DataFormatError(f"{path}: {len(raw) - 8} label bytes, header promises {count}")
    return np.frombuffer(raw, dtype=np.uint8, offset=8)


def load_idx(images_path, labels_path, split: str = "train", num_classes: int = 10, name: str = "") -> Dataset:
    """Parse an IDX image/label file pair into a Dataset scaled to [0, 1]."""
    pixels = _parse_idx_images(_read_bytes(images_path), images_path)
    labels = _parse_idx_labels(_read_bytes(labels_path), labels_path)
    if len(pixels) != len(labels):
        raise DataConsistencyError(
            f"{images_path} holds {len(pixels)} images but {labels_path} holds {len(labels)} labels"
        )
    images = pixels.astype(np.float32) / 255.0
    return Dataset(images, labels.astype(np.int64), split, num_classes, name)


def to_idx_bytes(dataset: Dataset):
    """Re-serialize a single-channel dataset as (image_bytes, label_bytes)."""
    n, c, h, w = dataset.images.shape
    if c != 1:
        raise DimensionError(f"IDX holds single-channel images, got {c} channels")
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8)
    image_bytes = struct.pack(">IIII", IDX_IMAGE_MAGIC, n, h, w) + pixels.tobytes()
    label_bytes = struct.pack(">II", IDX_LABEL_MAGIC, n) + dataset.labels.astype(np.uint8).tobytes()
    return image_bytes, label_bytes


# ---------------------------------------------------------------------------
# CIFAR-10
# ---------------------------------------------------------------------------

def _parse_cifar_records(raw: bytes, path):
    if len(raw) % CIFAR_RECORD_BYTES:
        raise DataFormatError(f"{path}: {len(raw)} bytes is not a multiple of {CIFAR_RECORD_BYTES}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    return records[:, 1:].reshape((-1,) + CIFAR_IMAGE_SHAPE), records[:, 0]


def load_cifar10(directory, split: str = "train", name: str = "cifar10") -> Dataset:
    """Read the CIFAR-10 binary batches of one split from ``directory``."""
    directory = Path(directory)
    files = CIFAR10_TRAIN_FILES if split == "train" else CIFAR10_TEST_FILES
    images, labels = [], []
    for filename in files:
        path = directory / filename
        if not path.exists():
            raise FileNotFoundError(f"CIFAR-10 batch file missing: {path}")
        pixels, lab = _parse_cifar_records(_read_bytes(path), path)
        images.append(pixels)
        labels.append(lab)
    pixels = np.concatenate(images)
    return Dataset(pixels.astype(np.float32) / 255.0, np.concatenate(labels).astype(np.int64), split, 10, name)


def to_cifar_bytes(dataset: Dataset) -> bytes:
    pixels = np.rint(dataset.images * 255.0).astype(np.uint8).reshape(len(dataset), -1)
    labels = dataset.labels.astype(np.uint8).reshape(-1, 1)
    return np.concatenate([labels, pixels], axis=1).tobytes()


# ---------------------------------------------------------------------------
# Lookup by name
# ---------------------------------------------------------------------------

def _resolve(path: Path) -> Path:
    if path.exists():
        return path
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz
    raise FileNotFoundError(f"dataset file missing: {path} (or {gz.name})")


def load_dataset(name: str, data_dir, split: str = "train") -> Dataset:
    """
    Load ``name`` from ``data_dir/<name>/``.

    MNIST-family directories hold the four IDX files; CIFAR-10 holds
    ``cifar-10-batches-bin/``.
    """
    if name not in AVAILABLE_DATASETS:
        raise ArgumentError(f"unknown dataset {name!r}; available: {AVAILABLE_DATASETS}")
    if split not in SPLITS:
        raise ArgumentError(f"split must be one of {SPLITS}, got {split!r}")
    root = Path(data_dir) / name
    if name == "cifar10":
        directory = root / CIFAR10_DIRNAME
        dataset = load_cifar10(directory if directory.exists() else root, split, name)
    else:
        image_file, label_file = IDX_FILES[split]
        dataset = load_idx(_resolve(root / image_file), _resolve(root / label_file), split, 10, name)
    logger.info(f"Loaded {name}/{split}: {len(dataset)} images of shape {dataset.image_shape}")
    return dataset


def dataset_available(name: str, data_dir) -> bool:
    try:
        for split in SPLITS:
            root = Path(data_dir) / name
            if name == "cifar10":
                directory = root / CIFAR10_DIRNAME
                directory = directory if directory.exists() else root
                files = CIFAR10_TRAIN_FILES if split == "train" else CIFAR10_TEST_FILES
                if not all((directory / f).exists() for f in files):
                    return False
            else:
                for filename in IDX_FILES[split]:
                    _resolve(root / filename)
        return True
    except FileNotFoundError:
        return False


def subset(dataset: Dataset, size: int, seed: int = 0) -> Dataset:
    """Seeded random subset of ``size`` examples, kept in original order."""
    if size is None or size <= 0 or size >= len(dataset):
        return dataset
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(dataset), size=size, replace=False))
    return Dataset(dataset.images[idx], dataset.labels[idx], dataset.split, dataset.num_classes, dataset.name)


# ---------------------------------------------------------------------------
# Preprocessing and augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Preprocess:
    mean: tuple
    std: tuple
    augmentation: str = "none"

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise ArgumentError(f"mean {self.mean} and std {self.std} differ in length")
        if any(s <= 0 for s in self.std):
            raise ArgumentError(f"std must be positive, got {self.std}")
        if self.augmentation not in ("none", "crop4_flip"):
            raise ArgumentError(f"unknown augmentation {self.augmentation!r}")

    def normalize(self, images: np.ndarray) -> np.ndarray:
        mean = np.asarray(self.mean, dtype=images.dtype).reshape(1, -1, 1, 1)
        std = np.asarray(self.std, dtype=images.dtype).reshape(1, -1, 1, 1)
        return (images - mean) / std


def default_preprocess(name: str) -> Preprocess:
    if name == "cifar10":
        return Preprocess(CIFAR10_MEAN, CIFAR10_STD, "crop4_flip")
    return Preprocess(MNIST_MEAN, MNIST_STD, "none")


def hflip(images: np.ndarray) -> np.ndarray:
    return images[..., ::-1].copy()


def crop_padded(images: np.ndarray, offsets: np.ndarray, padding: int = AUGMENT_PADDING) -> np.ndarray:
    """Zero-pad by ``padding`` and crop back to the original size at per-image (top, left) offsets."""
    n, _, h, w = images.shape
    padded = np.pad(images, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = np.empty_like(images)
    for i, (top, left) in enumerate(offsets):
        out[i] = padded[i, :, top:top + h, left:left + w]
    return out


def augment_crop_flip(batch: Batch, rng: np.random.Generator, flip_prob: float = 0.5,
                      padding: int = AUGMENT_PADDING) -> Batch:
    """Random pad-and-crop then horizontal flip with probability ``flip_prob``."""
    n, _, h, w = batch.images.shape
    if h < 8 or w < 8:
        raise DimensionError(f"augmentation needs spatial extents >= 8, got {h}x{w}")
    offsets = rng.integers(0, 2 * padding + 1, size=(n, 2))
    flips = rng.random(n) < flip_prob
    images = crop_padded(batch.images, offsets, padding)
    images[flips] = images[flips][..., ::-1]
    return Batch(images, batch.labels)


# ---------------------------------------------------------------------------
# Iteration
# ---------------------------------------------------------------------------

def batch_iter(dataset: Dataset, batch_size: int, shuffle: bool = False, seed: int = 0):
    """Yield Batches in order or in a seeded permutation; the last batch may be short."""
    if batch_size < 1:
        raise ArgumentError(f"batch_size must be >= 1, got {batch_size}")
    n = len(dataset)
    order = np.random.default_rng(seed).permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield Batch(dataset.images[idx], dataset.labels[idx])


def num_batches(dataset: Dataset, batch_size: int) -> int:
    return -(-len(dataset) // batch_size)
