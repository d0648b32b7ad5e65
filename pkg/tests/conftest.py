"""
Shared fixtures: import path, seeded generators, synthetic datasets and dataset files.
"""

import struct
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.engine.tensor import GRADCHECK_DTYPE  # noqa: E402
from src.models.lenet import ModelVariant, build_lenet3c1l  # noqa: E402
from src.utils.datasets import Dataset  # noqa: E402


def make_dataset(n=64, num_classes=10, channels=1, size=28, seed=0, split="train", name="mnist"):
    """
    Learnable synthetic images: class ``c`` lights up horizontal band ``c``.

    Pixel values are multiples of 1/255 so they survive IDX/CIFAR re-serialization.
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % num_classes
    rng.shuffle(labels)
    pixels = rng.integers(0, 60, size=(n, channels, size, size))
    band = max(1, size // num_classes)
    for i, label in enumerate(labels):
        start = (label * band) % size
        pixels[i, :, start:start + band, :] += 180
    pixels = np.clip(pixels, 0, 255).astype(np.uint8)
    return Dataset(pixels.astype(np.float32) / 255.0, labels.astype(np.int64), split, num_classes, name)


def idx_image_bytes(pixels: np.ndarray) -> bytes:
    n, h, w = pixels.shape
    return struct.pack(">IIII", 0x803, n, h, w) + pixels.astype(np.uint8).tobytes()


def idx_label_bytes(labels: np.ndarray) -> bytes:
    return struct.pack(">II", 0x801, len(labels)) + np.asarray(labels, dtype=np.uint8).tobytes()


def write_mnist_dir(root: Path, name: str = "mnist", train=None, test=None):
    """Write train/test IDX files for ``name`` under ``root``; returns ``root``."""
    train = train if train is not None else make_dataset(40, seed=1)
    test = test if test is not None else make_dataset(20, seed=2, split="test")
    folder = root / name
    folder.mkdir(parents=True, exist_ok=True)
    for ds, (img_name, lab_name) in [
        (train, ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")),
        (test, ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")),
    ]:
        pixels = np.rint(ds.images[:, 0] * 255).astype(np.uint8)
        (folder / img_name).write_bytes(idx_image_bytes(pixels))
        (folder / lab_name).write_bytes(idx_label_bytes(ds.labels))
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_dataset():
    return make_dataset(n=32, size=12, seed=3)


@pytest.fixture
def mnist_dir(tmp_path):
    return write_mnist_dir(tmp_path / "data")


@pytest.fixture
def gradcheck_model():
    """Factory for small float64 models used by finite-difference checks."""

    def build(kind="awn", widths=None, base_channels=4, size=8, seed=0):
        variant = ModelVariant(kind, base_channels=base_channels)
        return build_lenet3c1l(variant, 1, 5, trained_widths=widths, input_size=size,
                               seed=seed, dtype=GRADCHECK_DTYPE)

    return build
