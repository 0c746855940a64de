"""Key/value experiment configs (INI) with strict key checking.

Unknown sections or keys are hard errors: a typo in a config should
fail loudly instead of silently running with a default.
"""

from __future__ import annotations

import configparser
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .experiment import ExperimentConfig
from .features import FeatureConfig
from .nn.spec import NetworkPlan
from .synth import SynthConfig
from .training import TrainConfig

_INT = "int"
_FLOAT = "float"
_BOOL = "bool"
_STR = "str"
_INTS = "int list"
_FLOATS = "float list"

SCHEMA = {
    "dataset": {
        "num_mixtures": _INT,
        "mixture_seconds": _FLOAT,
        "events_min": _INT,
        "events_max": _INT,
        "polyphony_max": _INT,
        "min_cut": _FLOAT,
        "max_cut": _FLOAT,
        "split": _FLOATS,
        "folds": _INT,
        "sample_rate": _INT,
        "instances_per_class": _INT,
        "noise_floor_rms": _FLOAT,
        "scene": _STR,
        "seed": _INT,
    },
    "features": {
        "sample_rate": _INT,
        "frame_seconds": _FLOAT,
        "overlap_fraction": _FLOAT,
        "num_bands": _INT,
    },
    "network": {
        "conv_maps": _INTS,
        "kernel": _INTS,
        "pools": _INTS,
        "rnn_units": _INTS,
        "recurrent_dropout": _FLOAT,
        "tagging": _BOOL,
    },
    "training": {
        "sequence_frames": _INT,
        "batch_size": _INT,
        "max_epochs": _INT,
        "patience": _INT,
        "learning_rate": _FLOAT,
        "beta1": _FLOAT,
        "beta2": _FLOAT,
        "epsilon": _FLOAT,
        "dropout": _FLOAT,
        "checkpoint_every": _INT,
    },
    "experiment": {
        "mode": _STR,
        "fold": _STR,
        "chunk_seconds": _FLOAT,
        "threshold": _FLOAT,
        "manifest": _STR,
        "out_dir": _STR,
        "seed": _INT,
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(section: str, key: str, raw: str, kind: str):
    raw = raw.strip()
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _BOOL:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == _INTS:
            if raw in ("", "-"):
                return ()
            return tuple(int(part) for part in raw.split(","))
        if kind == _FLOATS:
            if raw in ("", "-"):
                return ()
            return tuple(float(part) for part in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind}") from None


def parse_config_file(path) -> dict[str, dict[str, str]]:
    """Read and validate an INI file; values stay as strings here."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(Path(path).read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    sections: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        known = SCHEMA[section]
        values = {}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = raw
        sections[section] = values
    return sections


def _section_kwargs(sections: dict, name: str) -> dict:
    return {key: _convert(name, key, raw, SCHEMA[name][key])
            for key, raw in sections.get(name, {}).items()}


def build_synth_config(sections: dict) -> SynthConfig:
    return SynthConfig(**_section_kwargs(sections, "dataset"))


def build_feature_config(sections: dict) -> FeatureConfig:
    return FeatureConfig(**_section_kwargs(sections, "features"))


def build_network_plan(sections: dict) -> NetworkPlan:
    kwargs = _section_kwargs(sections, "network")
    if "kernel" in kwargs and len(kwargs["kernel"]) != 2:
        raise ConfigError("[network] kernel must have two entries: rows,cols")
    return NetworkPlan(**kwargs)


def build_train_config(sections: dict) -> TrainConfig:
    return TrainConfig(**_section_kwargs(sections, "training"))


def build_experiment_config(sections: dict, manifest_path: str | None = None,
                            out_dir: str | None = None,
                            seed: int | None = None) -> ExperimentConfig:
    """Assemble the full experiment config; explicit arguments win over the file."""
    exp = _section_kwargs(sections, "experiment")
    mode = exp.get("mode", "frame")
    if mode not in ("frame", "tagging"):
        raise ConfigError(f"[experiment] mode must be frame or tagging, got {mode!r}")
    fold_raw = exp.get("fold", "all")
    if fold_raw == "all":
        fold = None
    else:
        try:
            fold = int(fold_raw)
        except ValueError:
            raise ConfigError(f"[experiment] fold must be an integer or 'all', "
                              f"got {fold_raw!r}") from None
    manifest_value = manifest_path if manifest_path is not None else exp.get("manifest")
    out_value = out_dir if out_dir is not None else exp.get("out_dir")
    if manifest_value is None:
        raise ConfigError("manifest path required ([experiment] manifest or --manifest)")
    if out_value is None:
        raise ConfigError("output directory required ([experiment] out_dir or --out-dir)")
    plan = build_network_plan(sections)
    if "tagging" not in sections.get("network", {}):
        plan = replace(plan, tagging=(mode == "tagging"))
    return ExperimentConfig(
        features=build_feature_config(sections),
        plan=plan,
        train=build_train_config(sections),
        manifest_path=str(manifest_value),
        out_dir=str(out_value),
        fold=fold,
        mode=mode,
        chunk_seconds=exp.get("chunk_seconds", 4.0),
        threshold=exp.get("threshold", 0.5),
        seed=seed if seed is not None else exp.get("seed", 0),
    )
