"""Synthetic polyphonic mixtures with exact ground truth.

A built-in bank of parametric event classes (tone bursts, chirps, band-passed
noise bursts) makes desk-scale experiments self-contained: mixtures are sums
of gain-scaled cuts of isolated instances, so annotations are exact by
construction. Train/validation/test partitions never share an instance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, write_wav
from .errors import ConfigError, RecipeError
from .events import EventAnnotation, write_annotation_file
from .manifest import DatasetManifest, RecordingEntry, write_manifest

# every bank instance is RMS-normalized to this level after enveloping
RMS_TARGET = 0.1
# summed mixtures louder than full scale are scaled back to this peak
CLIP_PEAK = 0.9


@dataclass(frozen=True)
class EventBank:
    """Library of isolated event clips grouped by class."""

    sample_rate: int
    classes: tuple[str, ...]
    instances: dict  # class name -> list of 1-D float arrays
    class_bands: dict  # class name -> (low_hz, high_hz) holding the spectral peak
    rms: float = RMS_TARGET

    def num_instances(self, class_name: str) -> int:
        return len(self.instances[class_name])

    def instance_seconds(self, class_name: str, index: int) -> float:
        return self.instances[class_name][index].size / self.sample_rate


def _envelope(num_samples: int, sample_rate: int, ramp_seconds: float = 0.1) -> np.ndarray:
    """Trapezoidal attack/release envelope."""
    ramp = min(int(round(ramp_seconds * sample_rate)), num_samples // 2)
    env = np.ones(num_samples)
    if ramp > 0:
        slope = np.linspace(0.0, 1.0, ramp, endpoint=False)
        env[:ramp] = slope
        env[-ramp:] = slope[::-1]
    return env


def _finish(wave: np.ndarray, sample_rate: int) -> np.ndarray:
    wave = wave * _envelope(wave.size, sample_rate)
    rms = np.sqrt(np.mean(wave ** 2))
    return wave * (RMS_TARGET / max(rms, 1e-12))


def _tone_instance(rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    duration = rng.uniform(4.0, 6.0)
    # wide placement range: held-out instances sit at fundamentals the
    # training instances only sparsely cover
    f0 = rng.uniform(350.0, 950.0)
    vibrato_rate = rng.uniform(4.0, 7.0)
    vibrato_depth = rng.uniform(0.002, 0.006)
    phase0 = rng.uniform(0.0, 2.0 * np.pi)
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    freq = f0 * (1.0 + vibrato_depth * np.sin(2.0 * np.pi * vibrato_rate * t + phase0))
    phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
    # weak harmonics keep the spectral peak at the fundamental
    wave = np.sin(phase) + 0.25 * np.sin(2.0 * phase) + 0.08 * np.sin(3.0 * phase)
    return _finish(wave, sample_rate)


def _chirp_instance(rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    duration = rng.uniform(4.0, 6.0)
    while True:
        f_start = rng.uniform(1200.0, 2800.0)
        f_end = rng.uniform(1200.0, 2800.0)
        if abs(f_end - f_start) >= 400.0:
            break
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    freq = f_start + (f_end - f_start) * t / duration
    phase = 2.0 * np.pi * np.cumsum(freq) / sample_rate
    return _finish(np.sin(phase), sample_rate)


def _noise_instance(rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    duration = rng.uniform(4.0, 6.0)
    low = rng.uniform(3400.0, 3700.0)
    high = rng.uniform(6100.0, 6500.0)
    n = int(round(duration * sample_rate))
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    spectrum[(freqs < low) | (freqs > high)] = 0.0
    return _finish(np.fft.irfft(spectrum, n=n), sample_rate)


_CLASS_BUILDERS = {
    "tone": _tone_instance,
    "chirp": _chirp_instance,
    "noise": _noise_instance,
}

# frequency intervals guaranteed to contain each class's spectral peak
_CLASS_BANDS = {
    "tone": (300.0, 1050.0),
    "chirp": (1100.0, 2900.0),
    "noise": (3300.0, 6800.0),
}


def builtin_event_bank(seed: int, sample_rate: int = 16000, instances_per_class: int = 12) -> EventBank:
    """Deterministic parametric event library; >= 10 instances per class."""
    if instances_per_class < 1:
        raise ConfigError(f"instances_per_class must be at least 1, got {instances_per_class}")
    classes = tuple(sorted(_CLASS_BUILDERS))
    root = np.random.SeedSequence([int(seed)])
    streams = root.spawn(len(classes))
    instances = {}
    for class_name, stream in zip(classes, streams):
        rng = np.random.default_rng(stream)
        instances[class_name] = [
            _CLASS_BUILDERS[class_name](rng, sample_rate) for _ in range(instances_per_class)
        ]
    return EventBank(
        sample_rate=sample_rate,
        classes=classes,
        instances=instances,
        class_bands=dict(_CLASS_BANDS),
    )


@dataclass(frozen=True)
class RecipeEvent:
    """One placed cut inside a mixture; times in seconds."""

    class_name: str
    instance_index: int
    cut_start: float
    cut_length: float
    place: float
    gain: float = 1.0


@dataclass(frozen=True)
class MixtureRecipe:
    """Full construction plan for one mixture."""

    events: tuple[RecipeEvent, ...]
    length_seconds: float
    seed: int
    # pink background bed; 0 disables it
    noise_floor_rms: float = 0.0
    noise_seed: int = 0


def _pink_bed(rng: np.random.Generator, num_samples: int, sample_rate: int, rms: float) -> np.ndarray:
    """1/f-shaped noise floor at the requested RMS."""
    white = rng.standard_normal(num_samples)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(num_samples, d=1.0 / sample_rate)
    spectrum /= np.sqrt(np.maximum(freqs, 20.0))
    spectrum[0] = 0.0
    bed = np.fft.irfft(spectrum, n=num_samples)
    return bed * (rms / max(np.sqrt(np.mean(bed ** 2)), 1e-12))


def synthesize_mixture(bank: EventBank, recipe: MixtureRecipe) -> tuple[AudioClip, list[EventAnnotation]]:
    """Sum the recipe's cuts into a waveform plus exact annotations.

    The result is peak-normalized to 0.9 only when the sum exceeds full scale.
    """
    sr = bank.sample_rate
    total = int(round(recipe.length_seconds * sr))
    mixture = np.zeros(total)
    annotations = []
    for ev in recipe.events:
        if ev.class_name not in bank.instances:
            raise RecipeError(f"recipe names unknown class {ev.class_name!r}")
        pool = bank.instances[ev.class_name]
        if not 0 <= ev.instance_index < len(pool):
            raise RecipeError(
                f"instance {ev.instance_index} out of range for class {ev.class_name!r}"
            )
        source = pool[ev.instance_index]
        cut_from = int(round(ev.cut_start * sr))
        cut_len = int(round(ev.cut_length * sr))
        if cut_from < 0 or cut_len < 1 or cut_from + cut_len > source.size:
            raise RecipeError(
                f"cut [{ev.cut_start:.3f}s + {ev.cut_length:.3f}s] exceeds the "
                f"{source.size / sr:.3f}s instance ({ev.class_name}/{ev.instance_index})"
            )
        place_at = int(round(ev.place * sr))
        if place_at < 0 or place_at + cut_len > total:
            raise RecipeError(
                f"placement {ev.place:.3f}s does not keep a {ev.cut_length:.3f}s cut "
                f"inside the {recipe.length_seconds:.3f}s mixture"
            )
        mixture[place_at : place_at + cut_len] += ev.gain * source[cut_from : cut_from + cut_len]
        annotations.append(
            EventAnnotation(
                class_name=ev.class_name,
                onset=ev.place,
                offset=ev.place + ev.cut_length,
                source_file=f"{ev.class_name}/{ev.instance_index}",
            )
        )
    if recipe.noise_floor_rms > 0.0:
        bed_rng = np.random.default_rng(np.random.SeedSequence([recipe.noise_seed]))
        mixture += _pink_bed(bed_rng, total, sr, recipe.noise_floor_rms)
    peak = np.max(np.abs(mixture)) if mixture.size else 0.0
    if peak > 1.0:
        mixture *= CLIP_PEAK / peak
    annotations.sort(key=lambda ev: (ev.onset, ev.offset, ev.class_name))
    return AudioClip(samples=mixture, sample_rate=sr), annotations


@dataclass(frozen=True)
class SynthConfig:
    """Settings for generate_dataset."""

    num_mixtures: int = 40
    mixture_seconds: float = 30.0
    events_min: int = 6
    events_max: int = 12
    polyphony_max: int = 2
    min_cut: float = 3.0
    max_cut: float = 15.0
    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    folds: int = 1
    sample_rate: int = 16000
    instances_per_class: int = 12
    noise_floor_rms: float = 0.03
    scene: str = "synthetic"
    seed: int = 0

    def __post_init__(self):
        if self.num_mixtures < 1:
            raise ConfigError("num_mixtures must be at least 1")
        if self.mixture_seconds <= 0:
            raise ConfigError("mixture_seconds must be positive")
        if not 1 <= self.events_min <= self.events_max:
            raise ConfigError(f"bad event count range [{self.events_min}, {self.events_max}]")
        if self.polyphony_max < 1:
            raise ConfigError("polyphony_max must be at least 1")
        if not 0 < self.min_cut <= self.max_cut:
            raise ConfigError(f"bad cut range [{self.min_cut}, {self.max_cut}]")
        if len(self.split) != 3 or any(s <= 0 for s in self.split):
            raise ConfigError("split must be three positive fractions")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {sum(self.split)}")
        if self.folds != 1 and self.folds < 3:
            raise ConfigError(
                "folds must be 1 or at least 3 (with 2 folds the rotated validation "
                "group would coincide with the other fold's test group)"
            )
        if self.min_cut > self.mixture_seconds:
            raise ConfigError("min_cut longer than the mixture itself")
        if self.noise_floor_rms < 0:
            raise ConfigError("noise_floor_rms must be non-negative")


def _split_counts(total: int, fractions: tuple[float, float, float]) -> list[int]:
    """Integer partition of `total` by fractions, each part at least 1."""
    if total < len(fractions):
        raise ConfigError(f"cannot split {total} items into {len(fractions)} non-empty parts")
    counts = [int(np.floor(f * total)) for f in fractions]
    counts = [max(c, 1) for c in counts]
    # hand out / take back the rounding remainder, largest part first
    while sum(counts) < total:
        counts[int(np.argmax(fractions))] += 1
    while sum(counts) > total:
        idx = int(np.argmax(counts))
        if counts[idx] <= 1:
            idx = counts.index(max(counts))
        counts[idx] -= 1
    return counts


def _max_simultaneous(intervals: list[tuple[float, float]]) -> int:
    """Peak number of overlapping [onset, offset) intervals."""
    peak = 0
    for onset, _ in intervals:
        covering = sum(1 for a, b in intervals if a <= onset < b)
        peak = max(peak, covering)
    return peak


def _draw_recipe(
    rng: np.random.Generator,
    bank: EventBank,
    allowed: dict,
    config: SynthConfig,
    seed: int,
) -> MixtureRecipe:
    num_events = int(rng.integers(config.events_min, config.events_max + 1))
    placed: list[RecipeEvent] = []
    intervals: list[tuple[float, float]] = []
    for _ in range(num_events):
        class_name = bank.classes[int(rng.integers(len(bank.classes)))]
        pool = allowed[class_name]
        instance_index = int(pool[int(rng.integers(len(pool)))])
        inst_seconds = bank.instance_seconds(class_name, instance_index)
        high = min(config.max_cut, inst_seconds, config.mixture_seconds)
        if high < config.min_cut:
            continue
        cut_length = float(rng.uniform(config.min_cut, high))
        cut_start = float(rng.uniform(0.0, inst_seconds - cut_length))
        # rejection sampling keeps simultaneous events within the polyphony cap
        for _attempt in range(64):
            place = float(rng.uniform(0.0, config.mixture_seconds - cut_length))
            candidate = intervals + [(place, place + cut_length)]
            if _max_simultaneous(candidate) <= config.polyphony_max:
                placed.append(
                    RecipeEvent(
                        class_name=class_name,
                        instance_index=instance_index,
                        cut_start=cut_start,
                        cut_length=cut_length,
                        place=place,
                    )
                )
                intervals = candidate
                break
    return MixtureRecipe(
        events=tuple(placed),
        length_seconds=config.mixture_seconds,
        seed=seed,
        noise_floor_rms=config.noise_floor_rms,
        noise_seed=int(rng.integers(2 ** 31)),
    )


def _instance_groups(bank: EventBank, config: SynthConfig, rng: np.random.Generator) -> list[dict]:
    """Disjoint per-class instance index pools, one dict per group.

    With folds == 1 the groups are the train/val/test partitions sized by the
    split fractions; with k folds there are k equal groups rotated into roles
    at manifest time.
    """
    num_groups = 3 if config.folds == 1 else config.folds
    groups = [dict() for _ in range(num_groups)]
    for class_name in bank.classes:
        count = bank.num_instances(class_name)
        if count < num_groups:
            raise ConfigError(
                f"class {class_name!r} has {count} instances; need at least one per "
                f"{'partition' if config.folds == 1 else 'fold group'} ({num_groups})"
            )
        order = rng.permutation(count)
        if config.folds == 1:
            counts = _split_counts(count, config.split)
            bounds = np.cumsum([0] + counts)
            chunks = [order[bounds[i] : bounds[i + 1]] for i in range(3)]
        else:
            chunks = [order[g::num_groups] for g in range(num_groups)]
        for group, chunk in zip(groups, chunks):
            group[class_name] = sorted(int(i) for i in chunk)
    return groups


def _group_roles(group: int, config: SynthConfig) -> tuple[str, ...]:
    """Role of a group-`group` recording in each fold."""
    if config.folds == 1:
        return (("train", "val", "test")[group],)
    roles = []
    for fold in range(config.folds):
        if group == fold:
            roles.append("test")
        elif group == (fold + 1) % config.folds:
            roles.append("val")
        else:
            roles.append("train")
    return tuple(roles)


def generate_dataset(
    config: SynthConfig, out_dir: str | Path, bank: EventBank | None = None
) -> tuple[DatasetManifest, list[MixtureRecipe]]:
    """Write audio, annotations, a manifest, and recipes under out_dir.

    Deterministic under config.seed; per-mixture RNG streams are spawned from
    one root so generation order never changes the data.
    """
    out_dir = Path(out_dir)
    if bank is None:
        bank = builtin_event_bank(config.seed, config.sample_rate, config.instances_per_class)
    if bank.sample_rate != config.sample_rate:
        raise ConfigError(
            f"bank rate {bank.sample_rate} != configured rate {config.sample_rate}"
        )
    (out_dir / "audio").mkdir(parents=True, exist_ok=True)
    (out_dir / "ann").mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence([int(config.seed)])
    streams = root.spawn(config.num_mixtures + 1)
    groups = _instance_groups(bank, config, np.random.default_rng(streams[0]))

    # number of mixtures built from each instance group
    if config.folds == 1:
        group_sizes = _split_counts(config.num_mixtures, config.split)
    else:
        base = config.num_mixtures // config.folds
        group_sizes = [
            base + (1 if g < config.num_mixtures % config.folds else 0)
            for g in range(config.folds)
        ]
        if min(group_sizes) < 1:
            raise ConfigError(
                f"{config.num_mixtures} mixtures cannot cover {config.folds} folds"
            )
    group_of_mixture = [g for g, size in enumerate(group_sizes) for _ in range(size)]

    recordings = []
    recipes = []
    for index in range(config.num_mixtures):
        group = group_of_mixture[index]
        rng = np.random.default_rng(streams[index + 1])
        recipe = _draw_recipe(rng, bank, groups[group], config, seed=config.seed)
        recipes.append(recipe)
        clip, annotations = synthesize_mixture(bank, recipe)
        rec_id = f"mix_{index:04d}"
        audio_rel = f"audio/{rec_id}.wav"
        ann_rel = f"ann/{rec_id}.tsv"
        write_wav(out_dir / audio_rel, clip)
        write_annotation_file(out_dir / ann_rel, annotations)
        recordings.append(
            RecordingEntry(
                rec_id=rec_id,
                audio_path=audio_rel,
                annotation_path=ann_rel,
                scene=config.scene,
                roles=_group_roles(group, config),
            )
        )

    manifest = DatasetManifest(
        classes=bank.classes,
        num_folds=1 if config.folds == 1 else config.folds,
        sample_rate=config.sample_rate,
        recordings=recordings,
        base_dir=out_dir,
    )
    write_manifest(out_dir / "manifest.tsv", manifest)
    recipe_dump = [
        {"rec_id": rec.rec_id, "length_seconds": recipe.length_seconds,
         "noise_floor_rms": recipe.noise_floor_rms, "noise_seed": recipe.noise_seed,
         "events": [asdict(ev) for ev in recipe.events]}
        for rec, recipe in zip(recordings, recipes)
    ]
    (out_dir / "recipes.json").write_text(
        json.dumps(recipe_dump, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return manifest, recipes
