"""
Mridangam Stroke Transcriber - Layer Specifications

Dense layer descriptions, parameter counting and the stock architectures.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence


class NetworkError(Exception):
    """Raised on invalid architectures, shapes or inputs."""

    pass


class Activation(Enum):
    RELU = "relu"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class LayerSpec:
    """One dense layer: in_dim -> out_dim, activation, optional dropout after it."""

    in_dim: int
    out_dim: int
    activation: Activation = Activation.RELU
    dropout_after: Optional[float] = None

    def __post_init__(self):
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise NetworkError(f"Layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.dropout_after is not None and not 0 <= self.dropout_after < 1:
            raise NetworkError(f"Dropout rate must be in [0, 1), got {self.dropout_after}")

    def to_dict(self) -> dict:
        return {
            "in": self.in_dim,
            "out": self.out_dim,
            "activation": self.activation.value,
            "dropout": self.dropout_after,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LayerSpec":
        return cls(data["in"], data["out"], Activation(data["activation"]), data["dropout"])


def param_count(spec: LayerSpec) -> int:
    """Weights plus biases: in*out + out."""
    return spec.in_dim * spec.out_dim + spec.out_dim


def validate_architecture(arch: Sequence[LayerSpec]) -> None:
    """
    Raises:
        NetworkError: If dims do not chain, softmax is not last-only, or
            dropout follows the final layer
    """
    if not arch:
        raise NetworkError("Architecture has no layers")
    for i, (a, b) in enumerate(zip(arch, arch[1:])):
        if a.out_dim != b.in_dim:
            raise NetworkError(f"Layer {i} outputs {a.out_dim} but layer {i + 1} expects {b.in_dim}")
    for i, spec in enumerate(arch[:-1]):
        if spec.activation is Activation.SOFTMAX:
            raise NetworkError(f"Softmax only allowed on the final layer (found at layer {i})")
    if arch[-1].activation is not Activation.SOFTMAX:
        raise NetworkError("Final layer must use softmax")
    if arch[-1].dropout_after:
        raise NetworkError("Dropout is not allowed after the final layer")


def build_architecture(
    dims: Sequence[int], dropout: float = 0.25, dropout_layers: Optional[int] = None
) -> List[LayerSpec]:
    """
    Dense ReLU stack ending in softmax.

    Args:
        dims: Layer widths including input and output, e.g. [1200, 256, 64, 6]
        dropout: Rate applied after the first `dropout_layers` hidden layers
        dropout_layers: How many hidden layers get dropout (default: all)
    """
    dims = list(dims)
    if len(dims) < 2:
        raise NetworkError(f"Need at least input and output dims, got {dims}")

    hidden = len(dims) - 2
    if dropout_layers is None:
        dropout_layers = hidden

    arch = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        arch.append(
            LayerSpec(
                d_in,
                d_out,
                Activation.SOFTMAX if last else Activation.RELU,
                dropout if (not last and i < dropout_layers and dropout > 0) else None,
            )
        )
    validate_architecture(arch)
    return arch


REFERENCE_DIMS = (12000, 15000, 9000, 4500, 1500, 450, 100, 6)


def reference_architecture(dropout: float = 0.25) -> List[LayerSpec]:
    """The 7-layer classifier: dropout after the first four hidden layers."""
    return build_architecture(REFERENCE_DIMS, dropout=dropout, dropout_layers=4)


def parse_dims(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise NetworkError(f"Architecture must be comma-separated integers, got '{text}'") from None
