"""Declarative layer-stack descriptions and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

ACTIVATIONS = ("sigmoid", "linear", "relu")


@dataclass(frozen=True)
class ConvSpec:
    """One convolutional block: same-padded conv, then batch norm, ReLU,
    non-overlapping max pooling along frequency, then dropout."""

    feature_maps: int
    kernel: tuple[int, int] = (5, 5)
    freq_pool: int = 1
    batch_norm: bool = True
    dropout: float = 0.0


@dataclass(frozen=True)
class RecurrentSpec:
    """A GRU layer; the recurrent dropout mask stays fixed along a sequence."""

    units: int
    recurrent_dropout: float = 0.0


@dataclass(frozen=True)
class DenseSpec:
    """Frame-wise feedforward layer (same weights at every frame)."""

    units: int
    activation: str = "sigmoid"


@dataclass(frozen=True)
class BatchNormSpec:
    """Standalone batch normalization over the current feature axis."""


@dataclass(frozen=True)
class DropoutSpec:
    """Standalone (time-varying) dropout."""

    rate: float = 0.25


@dataclass(frozen=True)
class TemporalMaxPoolSpec:
    """Collapse the time axis by max, yielding one prediction per window."""


LAYER_KINDS = {
    "conv": ConvSpec,
    "recurrent": RecurrentSpec,
    "dense": DenseSpec,
    "batch_norm": BatchNormSpec,
    "dropout": DropoutSpec,
    "temporal_max_pool": TemporalMaxPoolSpec,
}


def _layer_kind(layer) -> str:
    for kind, cls in LAYER_KINDS.items():
        if isinstance(layer, cls):
            return kind
    raise ConfigError(f"unknown layer spec type {type(layer).__name__}")


@dataclass(frozen=True)
class NetworkSpec:
    """Input geometry, class count, ordered layers, and the init seed."""

    num_bands: int
    num_classes: int
    layers: tuple
    seed: int = 0

    @property
    def tagging(self) -> bool:
        return any(isinstance(layer, TemporalMaxPoolSpec) for layer in self.layers)

    @property
    def num_conv_layers(self) -> int:
        return sum(isinstance(layer, ConvSpec) for layer in self.layers)

    @property
    def num_recurrent_layers(self) -> int:
        return sum(isinstance(layer, RecurrentSpec) for layer in self.layers)

    def violations(self) -> list[str]:
        """All constraint violations, empty when the spec is valid."""
        problems = []
        if self.num_bands < 1:
            problems.append(f"num_bands must be at least 1, got {self.num_bands}")
        if self.num_classes < 1:
            problems.append(f"num_classes must be at least 1, got {self.num_classes}")
        if not self.layers:
            problems.append("layer list is empty")
            return problems

        bands = max(self.num_bands, 1)
        seen_recurrent = False
        sigmoid_dense_positions = []
        pool_product = 1
        for idx, layer in enumerate(self.layers):
            where = f"layer {idx}"
            if isinstance(layer, ConvSpec):
                if seen_recurrent:
                    problems.append(f"{where}: convolutional layers must precede recurrent layers")
                if layer.feature_maps < 1:
                    problems.append(f"{where}: feature_maps must be at least 1")
                if layer.kernel[0] < 1 or layer.kernel[1] < 1:
                    problems.append(f"{where}: kernel dims must be at least 1, got {layer.kernel}")
                if not 0 <= layer.dropout < 1:
                    problems.append(f"{where}: dropout must lie in [0, 1), got {layer.dropout}")
                if layer.freq_pool < 1:
                    problems.append(f"{where}: freq_pool must be at least 1, got {layer.freq_pool}")
                elif bands % layer.freq_pool != 0:
                    problems.append(
                        f"{where}: freq_pool {layer.freq_pool} does not divide the "
                        f"incoming {bands} frequency bins"
                    )
                else:
                    pool_product *= layer.freq_pool
                    bands //= layer.freq_pool
            elif isinstance(layer, RecurrentSpec):
                seen_recurrent = True
                if layer.units < 1:
                    problems.append(f"{where}: units must be at least 1")
                if not 0 <= layer.recurrent_dropout < 1:
                    problems.append(
                        f"{where}: recurrent_dropout must lie in [0, 1), got {layer.recurrent_dropout}"
                    )
            elif isinstance(layer, DenseSpec):
                if layer.units < 1:
                    problems.append(f"{where}: units must be at least 1")
                if layer.activation not in ACTIVATIONS:
                    problems.append(f"{where}: unknown activation {layer.activation!r}")
                if layer.activation == "sigmoid":
                    sigmoid_dense_positions.append(idx)
            elif isinstance(layer, DropoutSpec):
                if not 0 <= layer.rate < 1:
                    problems.append(f"{where}: rate must lie in [0, 1), got {layer.rate}")
            elif isinstance(layer, (BatchNormSpec, TemporalMaxPoolSpec)):
                pass
            else:
                problems.append(f"{where}: unknown layer spec type {type(layer).__name__}")

        if pool_product > self.num_bands:
            problems.append(
                f"frequency pools multiply to {pool_product}, more than the {self.num_bands} input bands"
            )
        tpool_count = sum(isinstance(l, TemporalMaxPoolSpec) for l in self.layers)
        if tpool_count > 1:
            problems.append("at most one temporal max pool layer is allowed")

        last = self.layers[-1]
        if not (isinstance(last, DenseSpec) and last.activation == "sigmoid"):
            problems.append("the final layer must be a sigmoid dense layer")
        elif last.units != self.num_classes:
            problems.append(
                f"output layer has {last.units} units but the spec declares "
                f"{self.num_classes} classes"
            )
        if len(sigmoid_dense_positions) > 1:
            problems.append("exactly one sigmoid dense (output) layer is allowed")
        return problems

    def raise_if_invalid(self) -> None:
        problems = self.violations()
        if problems:
            raise ConfigError("invalid network spec: " + "; ".join(problems))

    def to_dict(self) -> dict:
        layer_dicts = []
        for layer in self.layers:
            entry = {"kind": _layer_kind(layer)}
            for name in getattr(layer, "__dataclass_fields__", {}):
                value = getattr(layer, name)
                entry[name] = list(value) if isinstance(value, tuple) else value
            layer_dicts.append(entry)
        return {
            "num_bands": self.num_bands,
            "num_classes": self.num_classes,
            "seed": self.seed,
            "layers": layer_dicts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        layers = []
        for entry in data["layers"]:
            entry = dict(entry)
            kind = entry.pop("kind")
            if kind not in LAYER_KINDS:
                raise ConfigError(f"unknown layer kind {kind!r}")
            if "kernel" in entry:
                entry["kernel"] = tuple(entry["kernel"])
            layers.append(LAYER_KINDS[kind](**entry))
        return cls(
            num_bands=int(data["num_bands"]),
            num_classes=int(data["num_classes"]),
            layers=tuple(layers),
            seed=int(data["seed"]),
        )


@dataclass(frozen=True)
class NetworkPlan:
    """Architecture knobs that become a NetworkSpec once the input geometry
    (bands, classes) is known; handy for config files and variant sweeps."""

    conv_maps: tuple[int, ...] = (16, 16)
    kernel: tuple[int, int] = (5, 5)
    pools: tuple[int, ...] = (5, 4)
    rnn_units: tuple[int, ...] = (32,)
    dropout: float = 0.25
    recurrent_dropout: float = 0.0
    tagging: bool = False
    seed: int = 0

    def __post_init__(self):
        if len(self.conv_maps) != len(self.pools):
            raise ConfigError(
                f"conv_maps has {len(self.conv_maps)} entries but pools has {len(self.pools)}"
            )

    def build(self, num_bands: int, num_classes: int) -> NetworkSpec:
        layers = []
        for maps, pool in zip(self.conv_maps, self.pools):
            layers.append(
                ConvSpec(
                    feature_maps=maps,
                    kernel=self.kernel,
                    freq_pool=pool,
                    batch_norm=True,
                    dropout=self.dropout,
                )
            )
        for units in self.rnn_units:
            layers.append(RecurrentSpec(units=units, recurrent_dropout=self.recurrent_dropout))
            if self.dropout > 0:
                layers.append(DropoutSpec(rate=self.dropout))
        if self.tagging:
            layers.append(TemporalMaxPoolSpec())
        layers.append(DenseSpec(units=num_classes, activation="sigmoid"))
        spec = NetworkSpec(
            num_bands=num_bands, num_classes=num_classes, layers=tuple(layers), seed=self.seed
        )
        spec.raise_if_invalid()
        return spec

    def variant(self, name: str) -> "NetworkPlan":
        """Degenerate architecture: 'cnn' drops recurrent layers, 'rnn' drops
        convolutional layers, 'crnn' is the plan itself."""
        if name == "crnn":
            return self
        if name == "cnn":
            return NetworkPlan(
                conv_maps=self.conv_maps, kernel=self.kernel, pools=self.pools,
                rnn_units=(), dropout=self.dropout,
                recurrent_dropout=0.0, tagging=self.tagging, seed=self.seed,
            )
        if name == "rnn":
            return NetworkPlan(
                conv_maps=(), kernel=self.kernel, pools=(),
                rnn_units=self.rnn_units, dropout=self.dropout,
                recurrent_dropout=self.recurrent_dropout, tagging=self.tagging, seed=self.seed,
            )
        raise ConfigError(f"unknown architecture variant {name!r}")
