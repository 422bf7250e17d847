"""Declarative model descriptions (ModelSpec) and their JSON form."""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dpgcnn.errors import ConfigError, DimensionMismatch

LAYER_KINDS = ("gat", "dpgcnn", "poly", "dual_gat", "dense")
ACTIVATIONS = ("elu", "relu", "none", "softmax")
MERGES = ("concat", "average")
TASKS = ("vertex_classification", "link_direction")
READOUTS = ("none", "endpoints", "edge", "both")
DUAL_MODES = ("chain", "fan", "classic_line_graph")
SUMMANDS = ("neighbor", "self")


@dataclass
class LayerSpec:
    """One convolutional (or dense) layer of a model.

    kind:
        gat       plain attention on the primal graph
        dpgcnn    dual convolution followed by primal convolution
        poly      polynomial attention filter; ``dual`` selects dual-derived
                  attention for the orders k >= 1
        dual_gat  dual convolution only (updates edge features)
        dense     bias-free projection of vertex features
    """

    kind: str = "gat"
    out_features: int = 8
    heads: int = 1
    merge: str = "concat"
    activation: str = "elu"
    order: int = 1
    dual: bool = False
    dual_out: int = 32
    dual_heads: int = 1
    dual_activation: str = "relu"
    concat_edge: bool = False

    @property
    def width(self) -> int:
        """Output width after the head merge."""
        if self.kind in ("dense", "poly"):
            return self.out_features
        if self.kind == "dual_gat":
            return self.out_features * self.heads
        return self.out_features * self.heads if self.merge == "concat" else self.out_features

    @property
    def dual_width(self) -> int:
        return self.dual_out * self.dual_heads

    @property
    def uses_dual(self) -> bool:
        return self.kind in ("dpgcnn", "dual_gat") or (self.kind == "poly" and self.dual)


@dataclass
class ModelSpec:
    """A full model: layer stack plus the graph preparation it expects.

    ``dropout_keep``, when set, overrides the training config for this model.
    """

    task: str = "vertex_classification"
    layers: List[LayerSpec] = field(default_factory=list)
    in_features: Optional[int] = None
    classes: Optional[int] = None
    dual_mode: str = "chain"
    self_loops: bool = True
    readout: str = "none"
    primal_summand: str = "neighbor"
    dropout_keep: Optional[float] = None

    @property
    def uses_dual(self) -> bool:
        return any(layer.uses_dual for layer in self.layers)

    def validate(self) -> None:
        """Check enumerations and layer compatibility.

        Raises:
            ConfigError: On unknown enumeration values or impossible widths.
        """
        _check_choice("task", self.task, TASKS)
        _check_choice("dual_mode", self.dual_mode, DUAL_MODES)
        _check_choice("readout", self.readout, READOUTS)
        _check_choice("primal_summand", self.primal_summand, SUMMANDS)
        if self.dropout_keep is not None and not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError(f"dropout_keep must be in (0, 1], got {self.dropout_keep}")
        if not self.layers:
            raise ConfigError("model has no layers")
        for i, layer in enumerate(self.layers):
            _check_choice(f"layers[{i}].kind", layer.kind, LAYER_KINDS)
            _check_choice(f"layers[{i}].activation", layer.activation, ACTIVATIONS)
            _check_choice(f"layers[{i}].merge", layer.merge, MERGES)
            _check_choice(f"layers[{i}].dual_activation", layer.dual_activation, ACTIVATIONS)
            if layer.out_features < 1 or layer.heads < 1:
                raise ConfigError(f"layers[{i}] needs positive out_features and heads")
            if layer.uses_dual and (layer.dual_out < 1 or layer.dual_heads < 1):
                raise ConfigError(f"layers[{i}] needs positive dual_out and dual_heads")
            if layer.kind == "poly" and layer.order < 0:
                raise ConfigError(f"layers[{i}].order must be >= 0")
        if self.uses_dual and self.dual_mode == "classic_line_graph" and self.self_loops:
            raise ConfigError("classic_line_graph duals need self_loops=false")
        if self.task == "vertex_classification":
            if self.readout != "none":
                raise ConfigError("vertex_classification models have no edge readout")
            if self.layers[-1].kind in ("dual_gat", "dense"):
                raise ConfigError("vertex_classification must end in a vertex layer")
            if self.classes is not None and self.layers[-1].width != self.classes:
                raise ConfigError(
                    f"final width {self.layers[-1].width} does not match {self.classes} classes"
                )
        elif self.readout == "none":
            raise ConfigError("link_direction models need a readout")

    def check_dataset(self, in_features: int, classes: Optional[int]) -> None:
        """Verify the declared dimensions against a dataset.

        Raises:
            DimensionMismatch: If the spec was written for different data.
        """
        if self.in_features is not None and self.in_features != in_features:
            raise DimensionMismatch(
                f"model expects {self.in_features} input features, dataset has {in_features}"
            )
        if classes is not None and self.task == "vertex_classification":
            if self.layers[-1].width != classes:
                raise DimensionMismatch(
                    f"model outputs {self.layers[-1].width} classes, dataset has {classes}"
                )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSpec":
        from dpgcnn.utils.config import dict_to_dataclass

        spec = dict_to_dataclass(cls, data, strict=True)
        spec.validate()
        return spec

    def to_json(self, path: Optional[Union[str, Path]] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n", encoding="utf-8")
        return text

    @classmethod
    def from_json(cls, source: Union[str, Path]) -> "ModelSpec":
        """Load from a JSON document or a path to one."""
        path = Path(source) if not str(source).lstrip().startswith("{") else None
        text = path.read_text(encoding="utf-8") if path is not None else str(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"model spec is not valid JSON: {e}") from e
        return cls.from_dict(data)


def _check_choice(name: str, value: str, choices: tuple) -> None:
    if value not in choices:
        raise ConfigError(f"{name}={value!r} is not one of {', '.join(choices)}")
