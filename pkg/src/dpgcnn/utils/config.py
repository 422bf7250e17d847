"""Configuration loading and validation."""

import os
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, List, Optional, Union

import yaml

from dpgcnn.errors import ConfigError
from dpgcnn.layers.spec import ModelSpec, _check_choice

DATA_DIR_ENV = "DPGCNN_DATA_DIR"


@dataclass
class AppConfig:
    """Application configuration."""

    name: str = "dpgcnn"
    log_level: str = "INFO"
    data_dir: str = "data"
    jobs: int = 1  # parallel sweep runs


@dataclass
class Config:
    """Root application configuration object."""

    app: AppConfig = field(default_factory=AppConfig)


@dataclass
class DatasetConfig:
    """Where the data comes from and how it is split."""

    name: str = ""
    content: str = ""
    cites: str = ""
    split: Optional[str] = None  # JSON id file; takes precedence over sampling
    train_size: int = 140
    val_size: int = 500
    test_size: int = 1000
    per_class: bool = True
    normalize: bool = True
    link_fractions: List[float] = field(default_factory=lambda: [0.1, 0.1, 0.1])
    synthetic: Optional[str] = None  # two_cluster | planted_direction
    synthetic_size: int = 40
    synthetic_features: int = 8


@dataclass
class TrainConfig:
    """Optimisation settings for one run (and the seed list of a sweep)."""

    lr: float = 0.005
    weight_decay: float = 5e-4
    dropout_keep: float = 0.4
    max_epochs: int = 1000
    patience: int = 100
    seeds: List[int] = field(default_factory=lambda: [0])
    sparsify_k: Optional[int] = None
    debug: bool = False

    def validate(self) -> None:
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError(f"dropout_keep must be in (0, 1], got {self.dropout_keep}")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.patience > self.max_epochs and self.max_epochs > 0:
            raise ConfigError("patience must not exceed max_epochs")
        if not self.seeds:
            raise ConfigError("seeds must list at least one seed")
        if self.sparsify_k is not None and self.sparsify_k < 1:
            raise ConfigError("sparsify_k must be >= 1")


@dataclass
class ExperimentConfig:
    """A complete, re-runnable experiment."""

    name: str = ""
    task: str = "vertex_classification"
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        _check_choice("task", self.task, ("vertex_classification", "link_direction"))
        if self.model.task != self.task:
            raise ConfigError(f"model.task={self.model.task!r} but experiment task={self.task!r}")
        self.model.validate()
        self.train.validate()
        if len(self.dataset.link_fractions) != 3 or any(
            f <= 0 for f in self.dataset.link_fractions
        ):
            raise ConfigError("link_fractions needs three positive fractions")
        if sum(self.dataset.link_fractions) > 1.0:
            raise ConfigError("link_fractions must sum to at most 1")
        if self.dataset.synthetic is None and not (self.dataset.content and self.dataset.cites):
            raise ConfigError("dataset needs content and cites paths (or a synthetic generator)")


def _unwrap_optional(tp: Any) -> Any:
    """Return T for Optional[T], else tp unchanged."""
    if typing.get_origin(tp) is Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return tp


def dict_to_dataclass(cls: type, data: Optional[dict], strict: bool = False) -> Any:
    """Recursively convert a dictionary to a dataclass instance.

    Handles nested dataclasses, Optional fields and lists of dataclasses.

    Args:
        cls: Target dataclass type.
        data: Parsed mapping (None yields the defaults).
        strict: Reject keys the dataclass does not declare.

    Raises:
        ConfigError: If the document does not fit the dataclass.
    """
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {type(data).__name__}")

    field_types = typing.get_type_hints(cls)
    declared = {f.name for f in fields(cls)}
    kwargs = {}

    for key, value in data.items():
        if key not in declared:
            if strict:
                raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
            continue

        field_type = _unwrap_optional(field_types[key])

        if is_dataclass(field_type) and isinstance(value, dict):
            kwargs[key] = dict_to_dataclass(field_type, value, strict)
        elif typing.get_origin(field_type) in (list, List) and isinstance(value, list):
            (item_type,) = typing.get_args(field_type) or (Any,)
            if is_dataclass(item_type):
                kwargs[key] = [dict_to_dataclass(item_type, v, strict) for v in value]
            else:
                kwargs[key] = list(value)
        else:
            kwargs[key] = value

    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"invalid {cls.__name__}: {e}") from e


def load_config(config_path: Union[str, Path, None] = None) -> Config:
    """Load application configuration from a YAML file.

    Args:
        config_path: Path to config file. If None, searches default locations.

    Returns:
        Config object with all settings. DPGCNN_DATA_DIR overrides app.data_dir.
    """
    search_paths = [
        Path(config_path) if config_path else None,
        Path("config/config.yaml"),
        Path.home() / ".config" / "dpgcnn" / "config.yaml",
    ]

    config_file = None
    for path in search_paths:
        if path and path.exists():
            config_file = path
            break

    data: dict = {}
    if config_file is not None:
        with open(config_file) as f:
            data = yaml.safe_load(f) or {}

    config = Config(app=dict_to_dataclass(AppConfig, data.get("app", {})))
    if os.environ.get(DATA_DIR_ENV):
        config.app.data_dir = os.environ[DATA_DIR_ENV]
    return config


def load_experiment(
    path: Union[str, Path], data_dir: Union[str, Path, None] = None
) -> ExperimentConfig:
    """Load an experiment document (JSON or YAML).

    Relative dataset paths are resolved against ``data_dir``.

    Raises:
        FileNotFoundError: If the document does not exist.
        ConfigError: If it is not a valid experiment.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: {e}") from e

    experiment = dict_to_dataclass(ExperimentConfig, data, strict=True)
    experiment.validate()

    if data_dir is not None:
        root = Path(data_dir)
        ds = experiment.dataset
        for name in ("content", "cites", "split"):
            value = getattr(ds, name)
            if value and not Path(value).is_absolute():
                setattr(ds, name, str(root / value))
    return experiment
