"""Declarative branchy DNN description.

A branchy model is a list of exit branches, shortest first. Each branch is a
standalone chain of layers (layers shared with the trunk are repeated in every
branch that uses them), so the planners can treat a branch as a simple chain.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ParseError, ValidationError


class LayerKind(str, enum.Enum):
    CONVOLUTIONAL = "Convolutional"
    RELU = "Relu"
    POOLING = "Pooling"
    LOCAL_RESPONSE_NORMALIZATION = "LocalResponseNormalization"
    DROPOUT = "Dropout"
    FULLY_CONNECTED = "FullyConnected"

    @classmethod
    def parse(cls, text: str) -> "LayerKind":
        try:
            return cls(text)
        except ValueError:
            pass
        lowered = str(text).strip().lower()
        for kind in cls:
            if kind.value.lower() == lowered or kind.name.lower() == lowered:
                return kind
        raise ValidationError(f"unknown layer kind {text!r}")


# Regression inputs per layer kind. Convolution's `filter_compute` is
# (filter size / stride)^2 * (number of filters), precomputed by the author.
FEATURES: dict[LayerKind, tuple[str, ...]] = {
    LayerKind.CONVOLUTIONAL: ("input_feature_maps", "filter_compute"),
    LayerKind.RELU: ("input_size",),
    LayerKind.POOLING: ("input_size", "output_size"),
    LayerKind.LOCAL_RESPONSE_NORMALIZATION: ("input_size",),
    LayerKind.DROPOUT: ("input_size",),
    LayerKind.FULLY_CONNECTED: ("input_size", "output_size"),
}


def check_features(kind: LayerKind, features: Mapping[str, float]) -> dict[str, float]:
    """Validate a feature map against the required set for `kind`.

    Returns a plain dict with float values in the canonical feature order.
    """
    required = FEATURES[kind]
    missing = [name for name in required if name not in features]
    extra = sorted(set(features) - set(required))
    if missing or extra:
        raise ValidationError(
            f"{kind.value} needs features {list(required)}; "
            f"missing {missing}, unexpected {extra}"
        )
    out = {}
    for name in required:
        value = float(features[name])
        if not math.isfinite(value) or value < 0:
            raise ValidationError(f"feature {name}={features[name]!r} must be finite and >= 0")
        out[name] = value
    return out


@dataclass(frozen=True)
class LayerSpec:
    id: int
    kind: LayerKind
    features: Mapping[str, float]
    output_bytes: int

    def __post_init__(self):
        object.__setattr__(self, "features", check_features(self.kind, self.features))
        if isinstance(self.output_bytes, bool) or int(self.output_bytes) != self.output_bytes:
            raise ValidationError(f"output_bytes must be an integer, got {self.output_bytes!r}")
        if self.output_bytes < 0:
            raise ValidationError(f"output_bytes must be >= 0, got {self.output_bytes}")
        object.__setattr__(self, "output_bytes", int(self.output_bytes))


@dataclass(frozen=True)
class ExitBranch:
    exit_index: int
    layers: tuple[LayerSpec, ...]
    accuracy: float

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValidationError(f"branch {self.exit_index}: no layers")
        for expected, layer in enumerate(self.layers, start=1):
            if layer.id != expected:
                raise ValidationError(
                    f"branch {self.exit_index}: layer ids must be 1..N consecutive, "
                    f"found {layer.id} at position {expected}"
                )
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError(f"branch {self.exit_index}: accuracy {self.accuracy} not in [0, 1]")

    @property
    def num_layers(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class BranchyModel:
    name: str
    input_bytes: int
    branches: tuple[ExitBranch, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if int(self.input_bytes) != self.input_bytes or self.input_bytes < 0:
            raise ValidationError(f"input_bytes must be a nonnegative integer, got {self.input_bytes!r}")
        object.__setattr__(self, "input_bytes", int(self.input_bytes))
        if not self.branches:
            raise ValidationError("model needs at least one exit branch")
        for expected, br in enumerate(self.branches, start=1):
            if br.exit_index != expected:
                raise ValidationError(f"exit indices must be 1..M in order, found {br.exit_index} at {expected}")
        for shorter, longer in zip(self.branches, self.branches[1:]):
            if longer.accuracy < shorter.accuracy:
                raise ValidationError(
                    f"branch {longer.exit_index}: accuracy {longer.accuracy} is below "
                    f"branch {shorter.exit_index}'s {shorter.accuracy}"
                )
            if longer.num_layers < shorter.num_layers:
                raise ValidationError(
                    f"branch {longer.exit_index}: {longer.num_layers} layers, fewer than "
                    f"branch {shorter.exit_index}'s {shorter.num_layers}"
                )

    @property
    def num_exits(self) -> int:
        return len(self.branches)

    def branch(self, i: int) -> ExitBranch:
        return branch(self, i)


def branch(model: BranchyModel, i: int) -> ExitBranch:
    """Return the branch of exit point `i` (1-based, 1 = shortest)."""
    if isinstance(i, bool) or not isinstance(i, int) or not 1 <= i <= model.num_exits:
        raise IndexError(f"exit index {i!r} out of range 1..{model.num_exits}")
    return model.branches[i - 1]


def model_from_dict(data: Mapping[str, Any]) -> BranchyModel:
    """Build a model from the parsed JSON structure, reporting the failing locus."""
    try:
        name = str(data["name"])
        input_bytes = data["input_bytes"]
        raw_branches = data["branches"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"model: missing top-level field {exc}") from None
    if not isinstance(raw_branches, list):
        raise ValidationError("model: 'branches' must be a list")

    branches = []
    for bpos, raw in enumerate(raw_branches, start=1):
        loc = f"branch #{bpos}"
        try:
            exit_index = raw["exit_index"]
            accuracy = float(raw["accuracy"])
            raw_layers = raw["layers"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{loc}: bad or missing field {exc}") from None
        layers = []
        for lpos, layer in enumerate(raw_layers, start=1):
            try:
                layers.append(
                    LayerSpec(
                        id=int(layer.get("id", lpos)),
                        kind=LayerKind.parse(layer["kind"]),
                        features=layer["features"],
                        output_bytes=layer["output_bytes"],
                    )
                )
            except ValidationError as exc:
                raise ValidationError(f"{loc}, layer {lpos}: {exc}") from None
            except (KeyError, TypeError, AttributeError) as exc:
                raise ValidationError(f"{loc}, layer {lpos}: bad or missing field {exc}") from None
        try:
            branches.append(ExitBranch(exit_index=exit_index, layers=tuple(layers), accuracy=accuracy))
        except ValidationError as exc:
            raise ValidationError(f"{loc}: {exc}") from None
    branches.sort(key=lambda b: b.exit_index)
    return BranchyModel(name=name, input_bytes=input_bytes, branches=tuple(branches))


def model_to_dict(model: BranchyModel) -> dict[str, Any]:
    return {
        "name": model.name,
        "input_bytes": model.input_bytes,
        "branches": [
            {
                "exit_index": br.exit_index,
                "accuracy": br.accuracy,
                "layers": [
                    {
                        "id": layer.id,
                        "kind": layer.kind.value,
                        "features": dict(layer.features),
                        "output_bytes": layer.output_bytes,
                    }
                    for layer in br.layers
                ],
            }
            for br in model.branches
        ],
    }


def load_model(path: str | Path) -> BranchyModel:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object", path=path)
    return model_from_dict(data)


def write_model(model: BranchyModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")
