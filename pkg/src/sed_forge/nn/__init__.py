"""From-scratch neural engine: layer specs, layers, networks, visualization."""

from .ascent import AscentResult, input_gradient_ascent
from .layers import dropout_mask, sigmoid, unstack_maps
from .network import Network
from .spec import (
    BatchNormSpec,
    ConvSpec,
    DenseSpec,
    DropoutSpec,
    NetworkPlan,
    NetworkSpec,
    RecurrentSpec,
    TemporalMaxPoolSpec,
)

__all__ = [
    "AscentResult",
    "BatchNormSpec",
    "ConvSpec",
    "DenseSpec",
    "DropoutSpec",
    "Network",
    "NetworkPlan",
    "NetworkSpec",
    "RecurrentSpec",
    "TemporalMaxPoolSpec",
    "dropout_mask",
    "input_gradient_ascent",
    "sigmoid",
    "unstack_maps",
]
