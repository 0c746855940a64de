"""Train and evaluate a small CRNN on the builtin synthetic dataset.

Generates the dataset on first use (40 mixtures of 30 s, three event
classes, polyphony up to 2), trains one model per fold, and prints the
pooled report. Everything is seeded, so repeated runs with the same
arguments reproduce the same report byte for byte.
"""

import argparse
import sys
from pathlib import Path

from sed_forge.experiment import ExperimentConfig, run_experiment
from sed_forge.features import FeatureConfig
from sed_forge.nn.spec import NetworkPlan
from sed_forge.synth import SynthConfig, generate_dataset
from sed_forge.training import TrainConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="toy_out", help="work directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-epochs", type=int, default=30)
    parser.add_argument("--fold", type=int, default=None,
                        help="single fold index (default: all folds)")
    args = parser.parse_args(argv)

    out = Path(args.out_dir)
    manifest_path = out / "data" / "manifest.tsv"
    if not manifest_path.exists():
        print("generating dataset ...")
        generate_dataset(SynthConfig(seed=0), out / "data")

    config = ExperimentConfig(
        features=FeatureConfig(sample_rate=16000),
        plan=NetworkPlan(conv_maps=(16, 16), kernel=(5, 5), pools=(4, 2),
                         rnn_units=(32,)),
        train=TrainConfig(max_epochs=args.max_epochs, patience=10, dropout=0.1),
        manifest_path=manifest_path,
        out_dir=out / "experiment",
        fold=args.fold,
        seed=args.seed,
    )
    result = run_experiment(config)
    print(f"report: {result.report_path}")
    for key in sorted(result.metrics):
        print(f"  {key}\t{result.metrics[key]:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
