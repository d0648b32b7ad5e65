"""
Flat key=value run configurations.

    # comment
    variant = awn
    widths = 1.0, 0.75, 0.5, 0.25

Values are typed by key. Unknown keys are rejected by name. Precedence:
DEFAULT_RUN_CONFIG < config file < explicit overrides (CLI flags).
"""

import hashlib
from pathlib import Path

from config.experiment_config import DEFAULT_RUN_CONFIG
from src.training.optim import TrainConfig
from src.utils.errors import ConfigError

BOOL_TRUE = {"1", "true", "yes", "on"}
BOOL_FALSE = {"0", "false", "no", "off"}
CONFIG_HASH_LENGTH = 16
HASH_EXCLUDED_KEYS = {"name", "description", "data_dir", "output_dir"}


def _key_types() -> dict:
    types = {}
    for key, value in DEFAULT_RUN_CONFIG.items():
        if isinstance(value, bool):
            types[key] = bool
        elif isinstance(value, list):
            types[key] = list
        else:
            types[key] = type(value)
    return types


RUN_CONFIG_TYPES = _key_types()


def parse_value(key: str, raw, source: str = "<config>"):
    """Convert ``raw`` (usually text) to the type registered for ``key``."""
    if key not in RUN_CONFIG_TYPES:
        raise ConfigError(f"{source}: unknown config key {key!r}")
    kind = RUN_CONFIG_TYPES[key]
    if not isinstance(raw, str):
        raw = ",".join(str(v) for v in raw) if isinstance(raw, (list, tuple)) else str(raw)
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in BOOL_TRUE:
                return True
            if lowered in BOOL_FALSE:
                return False
            raise ValueError(text)
        if kind is list:
            return [float(v) for v in text.split(",") if v.strip()]
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"{source}: {key}={raw!r} is not a valid {kind.__name__}") from None


def parse_run_config(text: str, source: str = "<config>") -> dict:
    config = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        config[key] = parse_value(key, value, f"{source}:{lineno}")
    return config


def load_run_config(path) -> dict:
    path = Path(path)
    return parse_run_config(path.read_text(encoding="utf-8"), str(path))


def build_run_config(path=None, overrides: dict = None, base: dict = None) -> dict:
    """Defaults (or ``base``), then the file at ``path``, then non-None ``overrides``."""
    config = dict(DEFAULT_RUN_CONFIG if base is None else base)
    if path is not None:
        config.update(load_run_config(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            config[key] = parse_value(key, value, "override")
    return config


def canonical_text(config: dict) -> str:
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(float(v)) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    hashed = {k: v for k, v in config.items() if k not in HASH_EXCLUDED_KEYS}
    return hashlib.sha256(canonical_text(hashed).encode("utf-8")).hexdigest()[:CONFIG_HASH_LENGTH]


def to_train_config(config: dict) -> TrainConfig:
    return TrainConfig(
        batch_size=config["batch_size"],
        lr0=config["lr"],
        momentum=config["momentum"],
        weight_decay=config["weight_decay"],
        epochs=config["epochs"],
        schedule=config["schedule"],
        milestones=tuple(config["milestones"]),
        decay_factor=config["decay_factor"],
        widths_mode=config["widths_mode"],
        widths=tuple(config["widths"]),
        n_samples=config["n_samples"],
        alpha_min=config["alpha_min"],
        alpha_max=config["alpha_max"],
        seed=config["seed"],
        augment=config["augment"],
        max_batches=config["max_batches"],
    )
