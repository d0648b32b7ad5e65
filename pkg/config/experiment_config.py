"""
Experiment-specific configuration settings.
"""

from config.settings import DATA_DIR, RESULTS_DIR

# Base run configuration; every preset and config file overrides a subset
DEFAULT_RUN_CONFIG = {
    "name": "default",
    "description": "AWN on FashionMNIST with random width sampling",

    # Model
    "variant": "awn",
    "width_multiplier": 0.0,   # 0 selects the variant default (sqrt(2) for awn, 1 otherwise)
    "base_channels": 32,

    # Data
    "dataset": "fashionmnist",
    "data_dir": str(DATA_DIR),
    "output_dir": str(RESULTS_DIR / "default"),
    "train_subset": 0,         # 0 keeps the full split
    "test_subset": 0,
    "augment": True,           # applies only to datasets whose preprocessing uses crop4_flip

    # Optimizer and schedule
    "epochs": 20,
    "batch_size": 128,
    "lr": 0.01,
    "momentum": 0.9,
    "weight_decay": 0.0,
    "schedule": "step",
    "milestones": [0.5, 0.75],
    "decay_factor": 0.1,
    "max_batches": 0,          # 0 runs every batch of an epoch

    # Widths
    "widths_mode": "random",
    "widths": [1.0, 0.75, 0.5, 0.25],
    "n_samples": 4,
    "alpha_min": 0.25,
    "alpha_max": 1.0,

    # Calibration, sweeps and the stats lab
    "calibrate_count": 10,
    "calibrate_passes": 1,
    "sweep_step": 0.025,
    "probe_size": 256,

    "seed": 1,
}

# FashionMNIST: AWN trained at the fixed LeNet width list
FASHIONMNIST_AWN = {
    "name": "fashionmnist_awn",
    "description": "AWN, fixed widths {1.0, 0.75, 0.5, 0.25}",
    "variant": "awn",
    "widths_mode": "fixed",
    "output_dir": str(RESULTS_DIR / "fashionmnist_awn"),
}

# FashionMNIST: AWN with random width sampling (n = 4)
FASHIONMNIST_AWN_RS = {
    "name": "fashionmnist_awn_rs",
    "description": "AWN+RS, alpha_min, alpha_max and two uniform draws per iteration",
    "variant": "awn",
    "widths_mode": "random",
    "output_dir": str(RESULTS_DIR / "fashionmnist_awn_rs"),
}

# FashionMNIST: slimmable baseline with one BN per trained width
FASHIONMNIST_SNET = {
    "name": "fashionmnist_snet",
    "description": "S-Net, switchable BN over {1.0, 0.75, 0.5, 0.25}",
    "variant": "snet",
    "widths_mode": "fixed",
    "output_dir": str(RESULTS_DIR / "fashionmnist_snet"),
}

# FashionMNIST: universally slimmable baseline, calibrated after training
FASHIONMNIST_USNET = {
    "name": "fashionmnist_usnet",
    "description": "US-Net, random widths then BN calibration at 10 widths",
    "variant": "usnet",
    "widths_mode": "random",
    "calibrate_count": 10,
    "output_dir": str(RESULTS_DIR / "fashionmnist_usnet"),
}

# MNIST: varying activation statistics (shared BN vs switchable BN vs AWN)
MNIST_STATS = {
    "name": "mnist_stats",
    "description": "Per-width BN statistics for three LeNet-3C1L variants",
    "dataset": "mnist",
    "widths_mode": "fixed",
    "width_multiplier": 1.0,
    "output_dir": str(RESULTS_DIR / "mnist_stats"),
}

# CIFAR-10: AWN with random sampling, step decay and stronger weight decay
CIFAR10_AWN_RS = {
    "name": "cifar10_awn_rs",
    "description": "AWN+RS on CIFAR-10 with crop/flip augmentation",
    "dataset": "cifar10",
    "variant": "awn",
    "widths_mode": "random",
    "augment": True,
    "epochs": 100,
    "lr": 0.01,
    "weight_decay": 1e-3,
    "output_dir": str(RESULTS_DIR / "cifar10_awn_rs"),
}

# FashionMNIST: triangular vs standard convolution trained at full width only
FASHIONMNIST_SUITABILITY = {
    "name": "fashionmnist_suitability",
    "description": "Multi-width suitability: full-width training, swept over [0.25, 1.0]",
    "widths_mode": "fixed",
    "widths": [1.0],
    "width_multiplier": 1.0,
    "output_dir": str(RESULTS_DIR / "fashionmnist_suitability"),
}

EXPERIMENT_REGISTRY = {
    "fashionmnist_awn": FASHIONMNIST_AWN,
    "fashionmnist_awn_rs": FASHIONMNIST_AWN_RS,
    "fashionmnist_snet": FASHIONMNIST_SNET,
    "fashionmnist_usnet": FASHIONMNIST_USNET,
    "mnist_stats": MNIST_STATS,
    "cifar10_awn_rs": CIFAR10_AWN_RS,
    "fashionmnist_suitability": FASHIONMNIST_SUITABILITY,
}


def get_experiment_config(experiment_name: str) -> dict:
    """Get the full run configuration for an experiment (defaults merged with the preset)."""
    preset = EXPERIMENT_REGISTRY.get(experiment_name.lower())
    if preset is None:
        raise KeyError(f"unknown experiment {experiment_name!r}; available: {get_available_experiments()}")
    return {**DEFAULT_RUN_CONFIG, **preset}


def get_available_experiments():
    """Get list of available experiments."""
    return list(EXPERIMENT_REGISTRY.keys())
