"""Shared fixtures: the toy dataset, the trained toy models, and the
acceptance summary printed at the end of the run."""

from __future__ import annotations

import time

import pytest
from hypothesis import settings

from sed_forge.experiment import ExperimentConfig, compare_architectures, run_experiment
from sed_forge.features import FeatureConfig
from sed_forge.nn.spec import NetworkPlan
from sed_forge.synth import SynthConfig, generate_dataset
from sed_forge.training import TrainConfig

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")

# settings shared by the toy experiments; training is bitwise
# deterministic, so the numbers asserted downstream are frozen
TOY_FEATURES = FeatureConfig(sample_rate=16000)
TOY_PLAN = NetworkPlan(conv_maps=(16, 16), kernel=(5, 5), pools=(4, 2), rnn_units=(32,))
TOY_TRAIN = TrainConfig(max_epochs=30, patience=10, dropout=0.1)
TOY_SEEDS = (0, 1, 2)

_criterion_lines: list[str] = []


def record_criterion(number: int, label: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _criterion_lines.append(f"criterion {number} ({label}): {status}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Builtin synthetic dataset: 40 x 30 s, 3 classes, polyphony <= 2."""
    out = tmp_path_factory.mktemp("toy_data")
    generate_dataset(SynthConfig(seed=0), out)
    return out / "manifest.tsv"


@pytest.fixture(scope="session")
def toy_comparison(toy_dataset, tmp_path_factory):
    """CRNN vs RNN over three seeds on the toy set; returns
    (CompareResult, out_dir, elapsed_seconds)."""
    out = tmp_path_factory.mktemp("toy_compare")
    config = ExperimentConfig(
        features=TOY_FEATURES,
        plan=TOY_PLAN,
        train=TOY_TRAIN,
        manifest_path=toy_dataset,
        out_dir=out,
        seed=0,
    )
    started = time.monotonic()
    result = compare_architectures(config, variants=("crnn", "rnn"), seeds=TOY_SEEDS)
    return result, out, time.monotonic() - started


@pytest.fixture(scope="session")
def toy_tagging(toy_dataset, tmp_path_factory):
    """Chunk-tagging experiment on the toy set; returns (ExperimentResult, out_dir)."""
    out = tmp_path_factory.mktemp("toy_tagging")
    config = ExperimentConfig(
        features=TOY_FEATURES,
        plan=NetworkPlan(conv_maps=(16, 16), kernel=(5, 5), pools=(4, 2),
                         rnn_units=(32,), tagging=True),
        train=TrainConfig(max_epochs=20, patience=6, dropout=0.1),
        mode="tagging",
        manifest_path=toy_dataset,
        out_dir=out,
        seed=0,
    )
    return run_experiment(config), out
