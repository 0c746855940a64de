"""Compare CRNN, CNN, and RNN variants on the builtin synthetic dataset.

Trains every variant with the same data and seed set, then prints the
per-seed and mean tables from compare.txt. The architectures differ only
in which stages are present; weights for shared stages start from the
same seeded initialization scheme.
"""

import argparse
import sys
from pathlib import Path

from sed_forge.experiment import ExperimentConfig, compare_architectures
from sed_forge.features import FeatureConfig
from sed_forge.nn.spec import NetworkPlan
from sed_forge.synth import SynthConfig, generate_dataset
from sed_forge.training import TrainConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="toy_out", help="work directory")
    parser.add_argument("--seeds", default="0,1,2", help="comma-separated seeds")
    parser.add_argument("--variants", default="crnn,cnn,rnn")
    parser.add_argument("--max-epochs", type=int, default=30)
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
        out_dir=out / "compare",
    )
    seeds = tuple(int(s) for s in args.seeds.split(","))
    variants = tuple(args.variants.split(","))
    result = compare_architectures(config, variants=variants, seeds=seeds)
    print(result.report_path.read_text(), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
