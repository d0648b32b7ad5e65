"""
Main settings configuration for the Any-Width Networks engine.
"""

import math
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent

# Data directories
DATA_DIR = Path(os.getenv("AWN_DATA_DIR", PROJECT_ROOT / "data"))
RESULTS_DIR = Path(os.getenv("AWN_RESULTS_DIR", PROJECT_ROOT / "results"))

# Reports directory
REPORTS_DIR = PROJECT_ROOT / "reports"

# Shipped run configs (flat key=value files)
EXPERIMENTS_DIR = PROJECT_ROOT / "config" / "experiments"

# Dataset layout under DATA_DIR
AVAILABLE_DATASETS = ["mnist", "fashionmnist", "cifar10"]
IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR10_DIRNAME = "cifar-10-batches-bin"
CIFAR10_TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR10_TEST_FILES = ["test_batch.bin"]

# Normalization constants
MNIST_MEAN = (0.5,)
MNIST_STD = (0.5,)
CIFAR10_MEAN = (0.4914, 0.4822, 0.4465)  # per-channel training-set statistics
CIFAR10_STD = (0.2470, 0.2435, 0.2616)
AUGMENT_PADDING = 4

# Network geometry (LeNet-3C1L)
BASE_CHANNELS = 32
AWN_WIDTH_MULTIPLIER = math.sqrt(2)  # doubles total parameters to offset the triangular mask
NUM_CONV_BLOCKS = 3
CONV_KERNEL_SIZE = 5
CONV_PADDING = 2
POOL_WINDOW = 2
POOL_STRIDE = 2

# Batch normalization
BN_EPS = 1e-5
BN_MOMENTUM = 0.1

# Width settings
DEFAULT_WIDTHS = [1.0, 0.75, 0.5, 0.25]
DEFAULT_ALPHA_MIN = 0.25
DEFAULT_ALPHA_MAX = 1.0
DEFAULT_N_SAMPLES = 4
SWEEP_STEP = 0.025

# Variants
AVAILABLE_VARIANTS = ["awn", "standard_shared_bn", "snet", "usnet"]
SWITCHABLE_VARIANTS = ["snet", "usnet"]

# Checkpoints
CHECKPOINT_MAGIC = b"AWNCKPT1"
CHECKPOINT_VERSION = 1
CHECKPOINT_FILENAME = "model.ckpt"

# Logging settings
LOG_LEVEL = os.getenv("AWN_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_FILE = os.getenv("AWN_LOG_FILE", "")

# Output file names
TRAIN_LOG_FILE = "train_log.csv"
CURVE_FILE = "curve.csv"
ACCURACY_TABLE_FILE = "accuracy_by_width.csv"
STATS_SUMMARY_FILE = "stats_summary.txt"

# Performance metrics reported by sweeps
PERFORMANCE_METRICS = [
    "auc",
    "max_step_drop",
    "accuracy_at_min",
    "accuracy_at_max",
]


def ensure_directories():
    """Create output directories if they don't exist."""
    for directory in [DATA_DIR, RESULTS_DIR, REPORTS_DIR]:
        directory.mkdir(parents=True, exist_ok=True)
