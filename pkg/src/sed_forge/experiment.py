"""Reproducible experiment pipeline: extract, train, detect, evaluate, report.

Artifacts never embed absolute paths or timestamps, so two runs with the
same dataset, config, and seed write bitwise-identical models and reports.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .audio import read_wav
from .container import write_container
from .errors import ConfigError, SedForgeError, StageError
from .events import EventRoll, build_target_matrix, read_annotation_file, write_annotation_file
from .features import (FeatureConfig, FeatureMatrix, build_mel_filterbank, compute_norm_stats,
                       extract_features, normalize)
from .inference import detect_events, predict
from .manifest import DatasetManifest, load_manifest
from .metrics import (SegmentStats, accumulate_stats, eer, error_rate_from_stats, f1_from_stats,
                      legacy_f1, one_second_segment_frames, scene_average, segment_rolls)
from .modelio import save_model
from .nn.ascent import input_gradient_ascent
from .nn.network import Network
from .nn.spec import NetworkPlan
from .training import TrainConfig, train

MODES = ("frame", "tagging")
ARCH_VARIANTS = ("crnn", "cnn", "rnn")
COMPARE_KEYS = ("f1_frame", "f1_1sec", "er_frame", "er_1sec")


@dataclass(frozen=True)
class ExperimentConfig:
    features: FeatureConfig
    plan: NetworkPlan
    train: TrainConfig
    manifest_path: str
    out_dir: str
    fold: int | None = None
    mode: str = "frame"
    chunk_seconds: float = 4.0
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.chunk_seconds <= 0:
            raise ConfigError("chunk_seconds must be > 0")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie in (0, 1)")
        if self.fold is not None and self.fold < 0:
            raise ConfigError("fold must be >= 0")
        if self.mode == "tagging" and not self.plan.tagging:
            raise ConfigError("tagging mode needs a plan with temporal pooling")
        if self.mode == "frame" and self.plan.tagging:
            raise ConfigError("frame mode cannot use a temporal-pooling plan")


@dataclass
class ExperimentResult:
    out_dir: Path
    report_path: Path
    metrics: dict[str, float]
    fold_stats: dict[int, dict[str, SegmentStats]] = field(default_factory=dict)
    model_paths: list[Path] = field(default_factory=list)


@contextmanager
def _stage(name: str):
    """Tag any pipeline failure with the stage it happened in."""
    try:
        yield
    except StageError:
        raise
    except (SedForgeError, OSError) as exc:
        raise StageError(name, str(exc)) from exc


def _effective_configs(config: ExperimentConfig) -> tuple[NetworkPlan, TrainConfig]:
    # config.seed is the one knob: it overrides the plan and train seeds,
    # and the training dropout rate is pushed into the network plan.
    metric = "tagging_eer" if config.mode == "tagging" else "frame_f1"
    plan = replace(config.plan, seed=config.seed, dropout=config.train.dropout)
    train_cfg = replace(config.train, seed=config.seed, validation_metric=metric,
                        threshold=config.threshold)
    return plan, train_cfg


def extract_manifest_features(manifest: DatasetManifest, features: FeatureConfig):
    """Features and target rolls for every recording, keyed by id."""
    bank = build_mel_filterbank(features.num_bands, features.sample_rate,
                                features.frame_length_samples)
    data = {}
    for entry in manifest.recordings:
        clip = read_wav(manifest.audio_file(entry), target_rate=manifest.sample_rate)
        feats = extract_features(clip, features, bank)
        annotations = read_annotation_file(manifest.annotation_file(entry))
        roll = build_target_matrix(annotations, manifest.classes, feats.num_frames,
                                   feats.frame_hop_seconds)
        data[entry.rec_id] = (feats, roll, entry.scene)
    return data


def _norm_items(data, entries, stats):
    items = []
    for entry in entries:
        feats, roll, _ = data[entry.rec_id]
        items.append((normalize(feats, stats), roll.activity.astype(np.uint8)))
    return items


def _write_stats_file(path, rows: list[tuple[str, SegmentStats]]) -> None:
    lines = ["# segment\ttp\tfp\tfn\tsubs\tins\tdels\tactives"]
    for name, st in rows:
        lines.append(f"{name}\t{st.tp}\t{st.fp}\t{st.fn}\t{st.subs}\t{st.ins}\t"
                     f"{st.dels}\t{st.actives}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_stats_file(path) -> dict[str, SegmentStats]:
    """Parse a per-fold stats dump back into SegmentStats by segment name."""
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, *counts = line.split("\t")
        tp, fp, fn, subs, ins, dels, actives = (int(c) for c in counts)
        out[name] = SegmentStats(tp, fp, fn, subs, ins, dels, actives)
    return out


def _header_lines(config: ExperimentConfig, manifest: DatasetManifest,
                  plan: NetworkPlan, folds: list[int]) -> list[str]:
    conv = ",".join(str(m) for m in plan.conv_maps) or "-"
    pools = ",".join(str(p) for p in plan.pools) or "-"
    rnn = ",".join(str(u) for u in plan.rnn_units) or "-"
    return [
        "format\tsed-forge-report\t1",
        f"mode\t{config.mode}",
        f"folds\t{','.join(str(f) for f in folds)}",
        f"recordings\t{len(manifest.recordings)}",
        f"classes\t{','.join(manifest.classes)}",
        f"sample_rate\t{manifest.sample_rate}",
        f"num_bands\t{config.features.num_bands}",
        f"frame_seconds\t{config.features.frame_seconds:.6f}",
        f"hop_seconds\t{config.features.hop_seconds:.6f}",
        f"sequence_frames\t{config.train.sequence_frames}",
        f"threshold\t{config.threshold:.6f}",
        f"seed\t{config.seed}",
        f"network\tconv={conv} pools={pools} kernel={plan.kernel[0]}x{plan.kernel[1]} "
        f"rnn={rnn} dropout={config.train.dropout:.6f}",
    ]


def _run_frame_fold(config, manifest, data, plan, train_cfg, fold, fold_dir):
    """Train on one fold and score its test recordings at both resolutions."""
    split = manifest.fold_split(fold)
    with _stage(f"train fold{fold}"):
        stats = compute_norm_stats([data[e.rec_id][0] for e in split["train"]])
        spec = plan.build(config.features.num_bands, len(manifest.classes))
        network = Network.initialize(spec)
        network, log = train(network, _norm_items(data, split["train"], stats),
                             _norm_items(data, split["val"], stats), train_cfg)
        fold_dir.mkdir(parents=True, exist_ok=True)
        model_path = fold_dir / "model.sfm"
        save_model(model_path, network, manifest.classes, config.features, stats)
        log.write(fold_dir / "train_log.tsv")

    seg_1s = one_second_segment_frames(config.features.hop_seconds)
    segments = (("frame", 1), ("1sec", seg_1s))
    totals = {name: SegmentStats() for name, _ in segments}
    silent = {name: SegmentStats() for name, _ in segments}
    active = {name: SegmentStats() for name, _ in segments}
    rolls = []
    with _stage(f"detect fold{fold}"):
        pred_dir = fold_dir / "pred"
        pred_dir.mkdir(parents=True, exist_ok=True)
        for entry in split["test"]:
            feats, ref_roll, scene = data[entry.rec_id]
            probs = predict(network, normalize(feats, stats), manifest.classes,
                            sequence_frames=train_cfg.sequence_frames)
            result = detect_events(probs, config.threshold)
            write_annotation_file(pred_dir / f"{entry.rec_id}.tsv", list(result.events))
            rolls.append((ref_roll, result.roll, scene))
            hollow = EventRoll(ref_roll.classes,
                              np.zeros_like(ref_roll.activity), ref_roll.frame_hop_seconds)
            full = EventRoll(ref_roll.classes,
                             np.ones_like(ref_roll.activity), ref_roll.frame_hop_seconds)
            for name, frames in segments:
                totals[name] += accumulate_stats(segment_rolls(ref_roll, result.roll, frames))
                silent[name] += accumulate_stats(segment_rolls(ref_roll, hollow, frames))
                active[name] += accumulate_stats(segment_rolls(ref_roll, full, frames))

    _write_stats_file(fold_dir / "stats.tsv", [(name, totals[name]) for name, _ in segments])
    return totals, silent, active, rolls, model_path


def _scene_stats(rolls, segments):
    """Per-(scene, segment) stats from collected (ref, pred, scene) triples."""
    per_scene = {}
    for ref_roll, pred_roll, scene in rolls:
        for name, frames in segments:
            stats = accumulate_stats(segment_rolls(ref_roll, pred_roll, frames))
            key = (scene, name)
            per_scene[key] = per_scene.get(key, SegmentStats()) + stats
    return per_scene


def _frame_report(config, manifest, plan, folds, pooled, silent, active,
                  per_scene, legacy, seg_1s) -> tuple[list[str], dict[str, float]]:
    metrics = {}
    lines = _header_lines(config, manifest, plan, folds)
    lines.append(f"segment_frames_1sec\t{seg_1s}")
    lines.append("")
    lines.append("# metric\tsegment\tscope\tvalue")
    for name in ("frame", "1sec"):
        precision, recall, f1 = f1_from_stats(pooled[name])
        er = error_rate_from_stats(pooled[name])
        metrics[f"precision_{name}"] = precision
        metrics[f"recall_{name}"] = recall
        metrics[f"f1_{name}"] = f1
        metrics[f"er_{name}"] = er
        metrics[f"er_{name}_silent"] = error_rate_from_stats(silent[name])
        metrics[f"er_{name}_active"] = error_rate_from_stats(active[name])
        for metric_name in ("precision", "recall", "f1", "er"):
            lines.append(f"{metric_name}\t{name}\tpooled\t{metrics[f'{metric_name}_{name}']:.6f}")
        lines.append(f"er\t{name}\tbaseline_silent\t{metrics[f'er_{name}_silent']:.6f}")
        lines.append(f"er\t{name}\tbaseline_active\t{metrics[f'er_{name}_active']:.6f}")
    scenes = sorted({scene for scene, _ in per_scene})
    for name in ("frame", "1sec"):
        f1s = [f1_from_stats(per_scene[(scene, name)])[2] for scene in scenes]
        ers = [error_rate_from_stats(per_scene[(scene, name)]) for scene in scenes]
        metrics[f"f1_{name}_scene_avg"] = scene_average(f1s)
        metrics[f"er_{name}_scene_avg"] = scene_average(ers)
        lines.append(f"f1\t{name}\tscene_avg\t{metrics[f'f1_{name}_scene_avg']:.6f}")
        lines.append(f"er\t{name}\tscene_avg\t{metrics[f'er_{name}_scene_avg']:.6f}")
    metrics["legacy_f1_1sec"] = legacy
    lines.append(f"legacy_f1\t1sec\tscene_avg\t{legacy:.6f}")
    lines.append("")
    lines.append("# scene\tsegment\tprecision\trecall\tf1\ter")
    for scene in scenes:
        for name in ("frame", "1sec"):
            precision, recall, f1 = f1_from_stats(per_scene[(scene, name)])
            er = error_rate_from_stats(per_scene[(scene, name)])
            lines.append(f"{scene}\t{name}\t{precision:.6f}\t{recall:.6f}\t"
                         f"{f1:.6f}\t{er:.6f}")
    return lines, metrics


def _run_frame(config, manifest, data, plan, train_cfg, folds, out_dir) -> ExperimentResult:
    seg_1s = one_second_segment_frames(config.features.hop_seconds)
    segments = (("frame", 1), ("1sec", seg_1s))
    pooled = {name: SegmentStats() for name, _ in segments}
    silent = {name: SegmentStats() for name, _ in segments}
    active = {name: SegmentStats() for name, _ in segments}
    per_scene = {}
    all_rolls = []
    fold_stats = {}
    model_paths = []
    for fold in folds:
        totals, fold_silent, fold_active, rolls, model_path = _run_frame_fold(
            config, manifest, data, plan, train_cfg, fold, out_dir / f"fold{fold}")
        fold_stats[fold] = totals
        model_paths.append(model_path)
        all_rolls.extend(rolls)
        for name, _ in segments:
            pooled[name] += totals[name]
            silent[name] += fold_silent[name]
            active[name] += fold_active[name]
        for key, stats in _scene_stats(rolls, segments).items():
            per_scene[key] = per_scene.get(key, SegmentStats()) + stats

    with _stage("evaluate"):
        legacy = legacy_f1([r for r, _, _ in all_rolls], [p for _, p, _ in all_rolls],
                           seg_1s, [s for _, _, s in all_rolls])
        lines, metrics = _frame_report(config, manifest, plan, folds, pooled, silent,
                                       active, per_scene, legacy, seg_1s)
    with _stage("report"):
        report_path = out_dir / "report.txt"
        report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ExperimentResult(out_dir=out_dir, report_path=report_path, metrics=metrics,
                            fold_stats=fold_stats, model_paths=model_paths)


def _chunk_items(data, entries, stats, chunk_frames):
    """Full chunks on the feature grid; label = any active frame in the chunk."""
    items = []
    for entry in entries:
        feats, roll, _ = data[entry.rec_id]
        norm = normalize(feats, stats)
        for c in range(norm.num_frames // chunk_frames):
            window = slice(c * chunk_frames, (c + 1) * chunk_frames)
            chunk = FeatureMatrix(values=norm.values[:, window],
                                  frame_hop_seconds=norm.frame_hop_seconds,
                                  normalized=True)
            labels = roll.activity[:, window].any(axis=1).astype(np.uint8)
            items.append((chunk, labels))
    return items


def _run_tagging(config, manifest, data, plan, train_cfg, folds, out_dir) -> ExperimentResult:
    chunk_frames = int(round(config.chunk_seconds / config.features.hop_seconds))
    if chunk_frames < 1:
        raise ConfigError("chunk_seconds shorter than one frame hop")
    all_labels = []
    all_scores = []
    model_paths = []
    for fold in folds:
        split = manifest.fold_split(fold)
        fold_dir = out_dir / f"fold{fold}"
        with _stage(f"train fold{fold}"):
            stats = compute_norm_stats([data[e.rec_id][0] for e in split["train"]])
            train_items = _chunk_items(data, split["train"], stats, chunk_frames)
            val_items = _chunk_items(data, split["val"], stats, chunk_frames)
            spec = plan.build(config.features.num_bands, len(manifest.classes))
            network = Network.initialize(spec)
            network, log = train(network, train_items, val_items, train_cfg)
            fold_dir.mkdir(parents=True, exist_ok=True)
            model_path = fold_dir / "model.sfm"
            save_model(model_path, network, manifest.classes, config.features, stats)
            log.write(fold_dir / "train_log.tsv")
            model_paths.append(model_path)
        with _stage(f"detect fold{fold}"):
            test_items = _chunk_items(data, split["test"], stats, chunk_frames)
            labels = np.stack([t for _, t in test_items])
            scores = []
            for start in range(0, len(test_items), train_cfg.batch_size):
                batch = test_items[start:start + train_cfg.batch_size]
                x = np.stack([chunk.values for chunk, _ in batch])
                scores.append(network.forward(x, training=False)[:, :, 0])
            scores = np.concatenate(scores, axis=0)
            fold_result = eer(labels, scores, classes=manifest.classes)
            _write_eer_file(fold_dir / "eer.tsv", manifest.classes, fold_result)
            all_labels.append(labels)
            all_scores.append(scores)

    with _stage("evaluate"):
        result = eer(np.concatenate(all_labels, axis=0), np.concatenate(all_scores, axis=0),
                     classes=manifest.classes)
        metrics = {"eer_mean": result.mean}
        for name, value in zip(manifest.classes, result.per_class):
            metrics[f"eer_class_{name}"] = float(value)
        lines = _header_lines(config, manifest, plan, folds)
        lines.append(f"chunk_frames\t{chunk_frames}")
        lines.append("")
        lines.append("# metric\tsegment\tscope\tvalue")
        lines.append(f"eer\tchunk\tpooled\t{result.mean:.6f}")
        lines.append("")
        lines.append("# class\teer")
        for name, value in zip(manifest.classes, result.per_class):
            lines.append(f"{name}\t{float(value):.6f}")
    with _stage("report"):
        report_path = out_dir / "report.txt"
        report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return ExperimentResult(out_dir=out_dir, report_path=report_path, metrics=metrics,
                            model_paths=model_paths)


def _write_eer_file(path, classes, result) -> None:
    lines = ["# class\teer"]
    for name, value in zip(classes, result.per_class):
        lines.append(f"{name}\t{float(value):.6f}")
    lines.append(f"mean\t{result.mean:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_provenance(path, manifest, folds) -> None:
    lines = ["# fold\trec_id\trole\tscene"]
    for fold in folds:
        for entry in manifest.recordings:
            lines.append(f"{fold}\t{entry.rec_id}\t{entry.role_in_fold(fold)}\t{entry.scene}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Full pipeline over the selected folds; see ExperimentResult for outputs.

    Stats are accumulated over the test data and then over folds before
    any ratio is computed, so pooled numbers are exactly recomputable
    from the per-fold stats dumps.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan, train_cfg = _effective_configs(config)
    with _stage("load"):
        manifest = load_manifest(config.manifest_path)
        manifest.validate()
        if manifest.sample_rate != config.features.sample_rate:
            raise ConfigError(f"manifest sample rate {manifest.sample_rate} does not match "
                              f"feature config sample rate {config.features.sample_rate}")
        if config.fold is not None and config.fold >= manifest.num_folds:
            raise ConfigError(f"fold {config.fold} out of range "
                              f"(manifest has {manifest.num_folds})")
    with _stage("extract"):
        data = extract_manifest_features(manifest, config.features)
    folds = list(range(manifest.num_folds)) if config.fold is None else [config.fold]
    _write_provenance(out_dir / "provenance.tsv", manifest, folds)
    if config.mode == "tagging":
        return _run_tagging(config, manifest, data, plan, train_cfg, folds, out_dir)
    return _run_frame(config, manifest, data, plan, train_cfg, folds, out_dir)


@dataclass
class CompareResult:
    report_path: Path
    mean_metrics: dict[str, dict[str, float]]
    run_metrics: dict[str, list[dict[str, float]]]


def compare_architectures(config: ExperimentConfig,
                          variants: tuple[str, ...] = ARCH_VARIANTS,
                          seeds: tuple[int, ...] = (0, 1, 2)) -> CompareResult:
    """Train each architecture variant per seed and tabulate the metrics."""
    if config.mode != "frame":
        raise ConfigError("architecture comparison is defined for frame mode")
    if len(seeds) == 0:
        raise ConfigError("at least one seed required")
    for variant in variants:
        if variant not in ARCH_VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_metrics: dict[str, list[dict[str, float]]] = {}
    for variant in variants:
        runs = []
        for seed in seeds:
            sub = replace(config, plan=config.plan.variant(variant), seed=seed,
                          out_dir=str(out_dir / variant / f"seed{seed}"))
            runs.append(run_experiment(sub).metrics)
        run_metrics[variant] = runs
    mean_metrics = {
        variant: {key: math.fsum(run[key] for run in runs) / len(runs)
                  for key in COMPARE_KEYS}
        for variant, runs in run_metrics.items()
    }
    lines = [
        "format\tsed-forge-compare\t1",
        f"seeds\t{','.join(str(s) for s in seeds)}",
        f"variants\t{','.join(variants)}",
        "",
        "# mean over seeds",
        "arch\t" + "\t".join(COMPARE_KEYS),
    ]
    for variant in variants:
        row = "\t".join(f"{mean_metrics[variant][key]:.6f}" for key in COMPARE_KEYS)
        lines.append(f"{variant}\t{row}")
    lines.append("")
    lines.append("# per run")
    lines.append("arch\tseed\t" + "\t".join(COMPARE_KEYS))
    for variant in variants:
        for seed, run in zip(seeds, run_metrics[variant]):
            row = "\t".join(f"{run[key]:.6f}" for key in COMPARE_KEYS)
            lines.append(f"{variant}\t{seed}\t{row}")
    report_path = out_dir / "compare.txt"
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return CompareResult(report_path=report_path, mean_metrics=mean_metrics,
                         run_metrics=run_metrics)


def render_matrix_png(matrix: np.ndarray, path, title: str | None = None) -> None:
    """Grayscale band-by-frame image; bands run bottom to top."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(np.asarray(matrix), origin="lower", aspect="auto", cmap="gray")
    ax.set_xlabel("frame")
    ax.set_ylabel("band")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def visualize_filters(network: Network, out_dir, conv_layer: int = 0,
                      units: list[int] | None = None, num_frames: int = 64,
                      steps: int = 100, step_size: float = 0.1, seed: int = 0,
                      render: bool = False) -> list[Path]:
    """Gradient-ascent input patterns for chosen conv units, one file each."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with _stage("visualize"):
        if not network.conv_blocks:
            raise ConfigError("network has no convolutional layers to visualize")
        if not 0 <= conv_layer < len(network.conv_blocks):
            raise ConfigError(f"conv layer {conv_layer} out of range "
                              f"({len(network.conv_blocks)} conv layers)")
        total_units = network.conv_blocks[conv_layer][1]
        chosen = list(range(total_units)) if units is None else list(units)
        for unit in chosen:
            result = input_gradient_ascent(network, conv_layer, unit, num_frames,
                                           steps=steps, step_size=step_size,
                                           seed=seed + unit)
            base = out / f"layer{conv_layer}_unit{unit:03d}"
            meta = {
                "conv_layer": conv_layer,
                "unit": unit,
                "initial_activation": result.initial_activation,
                "final_activation": result.final_activation,
                "accepted_steps": result.accepted_steps,
            }
            pattern_path = base.with_suffix(".pat")
            write_container(pattern_path, "pattern", meta, {"pattern": result.pattern})
            paths.append(pattern_path)
            if render:
                png_path = base.with_suffix(".png")
                render_matrix_png(result.pattern, png_path,
                                  title=f"conv {conv_layer} unit {unit}")
                paths.append(png_path)
    return paths
