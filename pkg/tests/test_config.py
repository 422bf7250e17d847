"""Tests for application and experiment configuration loading."""

from pathlib import Path

import pytest

from dpgcnn.errors import ConfigError
from dpgcnn.utils.config import (
    AppConfig,
    TrainConfig,
    dict_to_dataclass,
    load_config,
    load_experiment,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_shipped_experiments_load() -> None:
    for path in sorted(CONFIGS.glob("*.json")):
        experiment = load_experiment(path)
        assert experiment.name == path.stem
        assert experiment.model.task == experiment.task


def test_relative_dataset_paths_resolve_against_data_dir(tmp_path) -> None:
    experiment = load_experiment(CONFIGS / "cora_dpgcnn.json", tmp_path)
    assert experiment.dataset.content == str(tmp_path / "cora" / "cora.content")
    assert experiment.dataset.cites == str(tmp_path / "cora" / "cora.cites")
    assert experiment.model.layers[0].heads == 8


def test_yaml_experiment(tmp_path) -> None:
    path = tmp_path / "exp.yaml"
    path.write_text(
        "name: tiny\n"
        "dataset:\n  synthetic: two_cluster\n"
        "model:\n  classes: 2\n  layers:\n"
        "    - {kind: gat, out_features: 2, activation: softmax}\n"
        "train:\n  max_epochs: 5\n  patience: 5\n",
        encoding="utf-8",
    )
    experiment = load_experiment(path)
    assert experiment.train.max_epochs == 5
    assert experiment.model.layers[0].kind == "gat"


VALID = (
    "name: x\n"
    "dataset: {synthetic: two_cluster}\n"
    "model: {classes: 2, layers: [{kind: gat, out_features: 2, activation: softmax}]}\n"
)


@pytest.mark.parametrize(
    "extra",
    [
        "surprise: 1\n",
        "train: {dropout_keep: 0}\n",
        "train: {seeds: []}\n",
        "train: {max_epochs: 5, patience: 10}\n",
        "task: link_direction\n",
    ],
)
def test_invalid_experiments(tmp_path, extra: str) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text(VALID + extra, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment(path)


@pytest.mark.parametrize(
    "text",
    [
        VALID.replace("two_cluster}", "two_cluster, link_fractions: [0.5, 0.5, 0.5]}"),
        VALID.replace("synthetic: two_cluster", "name: nothing"),
        "name: [unclosed\n",
    ],
)
def test_invalid_documents(tmp_path, text: str) -> None:
    path = tmp_path / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_experiment(path)


def test_train_config_validate_accepts_zero_epochs() -> None:
    TrainConfig(max_epochs=0, patience=100).validate()
    with pytest.raises(ConfigError):
        TrainConfig(sparsify_k=0).validate()


def test_dict_to_dataclass_lenient_by_default() -> None:
    app = dict_to_dataclass(AppConfig, {"name": "x", "unknown": 1})
    assert app.name == "x"
    with pytest.raises(ConfigError):
        dict_to_dataclass(AppConfig, {"unknown": 1}, strict=True)
    with pytest.raises(ConfigError):
        dict_to_dataclass(AppConfig, ["not", "a", "mapping"])


def test_load_config_file_and_env(tmp_path, monkeypatch) -> None:
    path = tmp_path / "config.yaml"
    path.write_text("app:\n  log_level: DEBUG\n  jobs: 4\n", encoding="utf-8")
    monkeypatch.delenv("DPGCNN_DATA_DIR", raising=False)
    config = load_config(path)
    assert config.app.log_level == "DEBUG"
    assert config.app.jobs == 4
    assert config.app.data_dir == "data"

    monkeypatch.setenv("DPGCNN_DATA_DIR", str(tmp_path))
    assert load_config(path).app.data_dir == str(tmp_path)


def test_load_config_defaults_without_file(tmp_path, monkeypatch) -> None:
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path))
    monkeypatch.delenv("DPGCNN_DATA_DIR", raising=False)
    config = load_config()
    assert config.app.name == "dpgcnn"
    assert config.app.jobs == 1
