"""Command-line entry points for the sed-forge toolkit."""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .audio import read_wav
from .configfile import (build_experiment_config, build_feature_config, build_network_plan,
                         build_synth_config, build_train_config, parse_config_file)
from .container import read_container
from .errors import AnnotationError, ConfigError, SedForgeError
from .events import build_target_matrix, read_annotation_file, write_annotation_file
from .experiment import (compare_architectures, extract_manifest_features, render_matrix_png,
                         run_experiment, visualize_filters)
from .features import compute_norm_stats, extract_features, normalize, save_feature_cache
from .inference import detect_events, predict, save_probabilities
from .manifest import load_manifest
from .metrics import (SegmentStats, accumulate_stats, error_rate_from_stats, f1_from_stats,
                      legacy_f1, one_second_segment_frames, scene_average, segment_rolls)
from .modelio import load_model, save_model
from .nn.network import Network
from .synth import generate_dataset
from .training import train


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip() != "")


def cmd_synth(args) -> int:
    sections = parse_config_file(args.config) if args.config else {}
    config = build_synth_config(sections)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    manifest, _ = generate_dataset(config, args.out_dir)
    print(f"wrote {len(manifest.recordings)} recordings to {args.out_dir}")
    print(f"classes: {','.join(manifest.classes)}")
    print(f"manifest: {Path(args.out_dir) / 'manifest.tsv'}")
    return 0


def cmd_extract(args) -> int:
    sections = parse_config_file(args.config) if args.config else {}
    features = build_feature_config(sections)
    manifest = load_manifest(args.manifest)
    manifest.validate()
    if manifest.sample_rate != features.sample_rate:
        raise ConfigError(f"manifest sample rate {manifest.sample_rate} does not match "
                          f"feature config sample rate {features.sample_rate}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = extract_manifest_features(manifest, features)
    for rec_id, (feats, _, _) in data.items():
        save_feature_cache(out_dir / f"{rec_id}.sff", feats, stats_id="raw",
                           extra_meta={"rec_id": rec_id})
    print(f"wrote {len(data)} feature caches to {out_dir}")
    return 0


def cmd_train(args) -> int:
    sections = parse_config_file(args.config)
    features = build_feature_config(sections)
    plan = build_network_plan(sections)
    train_cfg = build_train_config(sections)
    seed = args.seed if args.seed is not None else 0
    plan = replace(plan, seed=seed, dropout=train_cfg.dropout)
    train_cfg = replace(train_cfg, seed=seed)

    manifest = load_manifest(args.manifest)
    manifest.validate()
    if manifest.sample_rate != features.sample_rate:
        raise ConfigError(f"manifest sample rate {manifest.sample_rate} does not match "
                          f"feature config sample rate {features.sample_rate}")
    data = extract_manifest_features(manifest, features)
    split = manifest.fold_split(args.fold)
    stats = compute_norm_stats([data[e.rec_id][0] for e in split["train"]])

    def items(entries):
        return [(normalize(data[e.rec_id][0], stats),
                 data[e.rec_id][1].activity.astype(np.uint8)) for e in entries]

    spec = plan.build(features.num_bands, len(manifest.classes))
    network = Network.initialize(spec)
    network, log = train(network, items(split["train"]), items(split["val"]), train_cfg,
                         checkpoint_path=args.checkpoint, resume=args.resume)
    save_model(args.out, network, manifest.classes, features, stats)
    log_path = Path(args.out).with_suffix(".log.tsv")
    log.write(log_path)
    print(f"model: {args.out}")
    print(f"log: {log_path}")
    for event in log.events:
        print(event)
    return 0


def cmd_detect(args) -> int:
    model = load_model(args.model)
    clip = read_wav(args.audio, target_rate=model.features.sample_rate)
    feats = normalize(extract_features(clip, model.features), model.stats)
    probs = predict(model.network, feats, model.classes,
                    sequence_frames=args.sequence_frames)
    result = detect_events(probs, args.threshold)
    write_annotation_file(args.out, list(result.events))
    print(f"{len(result.events)} events -> {args.out}")
    if args.emit_roll:
        save_probabilities(args.emit_roll, probs)
        print(f"probabilities -> {args.emit_roll}")
    return 0


def _eval_rolls(args):
    """Pair up reference and prediction files and rasterize both."""
    pred_dir = Path(args.pred)
    ref_dir = Path(args.ref)
    pred_files = sorted(pred_dir.glob("*.tsv"))
    if not pred_files:
        raise AnnotationError(f"no .tsv prediction files in {pred_dir}")
    scenes_by_id = {}
    classes = None
    if args.manifest:
        manifest = load_manifest(args.manifest)
        classes = manifest.classes
        scenes_by_id = {entry.rec_id: entry.scene for entry in manifest.recordings}
    pairs = []
    for pred_file in pred_files:
        ref_file = ref_dir / pred_file.name
        if not ref_file.exists():
            raise AnnotationError(f"no reference annotations for {pred_file.name}")
        pairs.append((pred_file.stem, read_annotation_file(ref_file),
                      read_annotation_file(pred_file)))
    if classes is None:
        names = {ev.class_name for _, ref, pred in pairs for ev in ref + pred}
        classes = tuple(sorted(names))
    rolls = []
    for rec_id, ref_events, pred_events in pairs:
        last = max([ev.offset for ev in ref_events + pred_events], default=args.hop)
        num_frames = max(1, math.ceil(round(last / args.hop, 9)))
        ref_roll = build_target_matrix(ref_events, classes, num_frames, args.hop)
        pred_roll = build_target_matrix(pred_events, classes, num_frames, args.hop)
        rolls.append((rec_id, ref_roll, pred_roll, scenes_by_id.get(rec_id, "default")))
    return rolls


def cmd_eval(args) -> int:
    rolls = _eval_rolls(args)
    seg_1s = one_second_segment_frames(args.hop)
    wanted = [("frame", 1), ("1sec", seg_1s)] if args.segment == "both" else \
        [("frame", 1)] if args.segment == "frame" else [("1sec", seg_1s)]
    lines = ["format\tsed-forge-eval\t1", f"recordings\t{len(rolls)}", ""]
    lines.append("# metric\tsegment\tscope\tvalue")
    for name, frames in wanted:
        pooled = SegmentStats()
        per_scene = {}
        for _, ref_roll, pred_roll, scene in rolls:
            stats = accumulate_stats(segment_rolls(ref_roll, pred_roll, frames))
            pooled += stats
            per_scene[scene] = per_scene.get(scene, SegmentStats()) + stats
        precision, recall, f1 = f1_from_stats(pooled)
        lines.append(f"precision\t{name}\tpooled\t{precision:.6f}")
        lines.append(f"recall\t{name}\tpooled\t{recall:.6f}")
        lines.append(f"f1\t{name}\tpooled\t{f1:.6f}")
        lines.append(f"er\t{name}\tpooled\t{error_rate_from_stats(pooled):.6f}")
        if args.by_scene:
            scenes = sorted(per_scene)
            f1s = [f1_from_stats(per_scene[s])[2] for s in scenes]
            ers = [error_rate_from_stats(per_scene[s]) for s in scenes]
            lines.append(f"f1\t{name}\tscene_avg\t{scene_average(f1s):.6f}")
            lines.append(f"er\t{name}\tscene_avg\t{scene_average(ers):.6f}")
            for scene in scenes:
                p, r, f = f1_from_stats(per_scene[scene])
                er = error_rate_from_stats(per_scene[scene])
                lines.append(f"f1\t{name}\tscene:{scene}\t{f:.6f}")
                lines.append(f"er\t{name}\tscene:{scene}\t{er:.6f}")
    if args.legacy:
        value = legacy_f1([r for _, r, _, _ in rolls], [p for _, _, p, _ in rolls],
                          seg_1s, [s for _, _, _, s in rolls])
        lines.append(f"legacy_f1\t1sec\tscene_avg\t{value:.6f}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"report -> {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_run(args) -> int:
    sections = parse_config_file(args.config)
    config = build_experiment_config(sections, manifest_path=args.manifest,
                                     out_dir=args.out_dir, seed=args.seed)
    if args.fold is not None:
        config = replace(config, fold=None if args.fold == "all" else int(args.fold))
    result = run_experiment(config)
    print(f"report: {result.report_path}")
    for key in sorted(result.metrics):
        print(f"{key}\t{result.metrics[key]:.6f}")
    return 0


def cmd_compare(args) -> int:
    sections = parse_config_file(args.config)
    config = build_experiment_config(sections, manifest_path=args.manifest,
                                     out_dir=args.out_dir)
    seeds = _int_tuple(args.seeds)
    variants = tuple(args.variants.split(","))
    result = compare_architectures(config, variants=variants, seeds=seeds)
    print(f"report: {result.report_path}")
    for variant, metrics in result.mean_metrics.items():
        row = "\t".join(f"{metrics[k]:.6f}" for k in sorted(metrics))
        print(f"{variant}\t{row}")
    return 0


def cmd_visualize(args) -> int:
    model = load_model(args.model)
    units = None if args.units == "all" else list(_int_tuple(args.units))
    paths = visualize_filters(model.network, args.out_dir, conv_layer=args.layer,
                              units=units, num_frames=args.frames, steps=args.steps,
                              step_size=args.step_size,
                              seed=args.seed if args.seed is not None else 0,
                              render=args.png)
    print(f"wrote {len(paths)} files to {args.out_dir}")
    return 0


def cmd_plot(args) -> int:
    source = Path(args.input)
    if source.suffix == ".tsv":
        events = read_annotation_file(source)
        if args.classes:
            classes = tuple(args.classes.split(","))
        else:
            classes = tuple(sorted({ev.class_name for ev in events}))
        if not classes:
            raise AnnotationError(f"{source}: no events and no --classes given")
        last = max([ev.offset for ev in events], default=args.hop)
        duration = args.duration if args.duration else last
        num_frames = max(1, math.ceil(round(duration / args.hop, 9)))
        roll = build_target_matrix(events, classes, num_frames, args.hop)
        matrix = roll.activity.astype(np.float64)
        title = f"{source.stem} ({','.join(classes)})"
    else:
        kind, meta, blobs = read_container(source)
        if kind == "roll":
            matrix = blobs["values"]
            title = f"{source.stem} ({','.join(meta.get('classes', []))})"
        elif kind == "features":
            matrix = blobs["values"]
            title = source.stem
        elif kind == "pattern":
            matrix = blobs["pattern"]
            title = f"{source.stem} (activation {meta.get('final_activation', 0.0):.3f})"
        else:
            raise ConfigError(f"{source}: cannot plot container kind {kind!r}")
    render_matrix_png(matrix, args.out, title=title)
    print(f"plot -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sed-forge",
                                     description="Sound event detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", help="INI file with a [dataset] section")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="write feature caches for a manifest")
    p.add_argument("--config", help="INI file with a [features] section")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train one fold and save the model")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="model file to write (.sfm)")
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--checkpoint", help="checkpoint file updated after each epoch")
    p.add_argument("--resume", action="store_true", help="continue from --checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="detect events in an audio file")
    p.add_argument("--model", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--sequence-frames", type=int, default=128)
    p.add_argument("--out", required=True, help="annotation file to write")
    p.add_argument("--emit-roll", help="also write the probability matrix container")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--ref", required=True, help="directory of reference .tsv files")
    p.add_argument("--pred", required=True, help="directory of predicted .tsv files")
    p.add_argument("--segment", choices=("frame", "1sec", "both"), default="both")
    p.add_argument("--by-scene", action="store_true")
    p.add_argument("--legacy", action="store_true", help="also report legacy F1")
    p.add_argument("--manifest", help="supplies class list and scene labels")
    p.add_argument("--hop", type=float, default=0.02, help="frame hop in seconds")
    p.add_argument("--out", help="report file (stdout if omitted)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="full experiment: extract, train, detect, eval")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", help="overrides [experiment] manifest")
    p.add_argument("--out-dir", help="overrides [experiment] out_dir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fold", help="fold index or 'all'")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="train crnn/cnn/rnn variants and tabulate")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest", help="overrides [experiment] manifest")
    p.add_argument("--out-dir", help="overrides [experiment] out_dir")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--variants", default="crnn,cnn,rnn")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("visualize", help="gradient-ascent input patterns per conv unit")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--layer", type=int, default=0)
    p.add_argument("--units", default="all", help="comma list of unit indices or 'all'")
    p.add_argument("--frames", type=int, default=64)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--png", action="store_true", help="also render PNG images")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("plot", help="render annotations, rolls, or patterns as PNG")
    p.add_argument("--input", required=True, help=".tsv annotations or a container file")
    p.add_argument("--out", required=True, help="PNG file to write")
    p.add_argument("--classes", help="comma list fixing the class order for .tsv input")
    p.add_argument("--hop", type=float, default=0.02)
    p.add_argument("--duration", type=float, help="plot length in seconds for .tsv input")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SedForgeError, OSError) as exc:
        print(f"sed-forge: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
