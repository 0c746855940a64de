import hashlib
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sed_forge.errors import ConfigError, RecipeError
from sed_forge.synth import (
    MixtureRecipe,
    RecipeEvent,
    SynthConfig,
    _split_counts,
    builtin_event_bank,
    generate_dataset,
    synthesize_mixture,
)

SMALL = SynthConfig(num_mixtures=9, mixture_seconds=8.0, events_min=2, events_max=4,
                    min_cut=1.0, max_cut=4.0, instances_per_class=6, seed=4)


@pytest.fixture(scope="module")
def bank():
    return builtin_event_bank(seed=4, instances_per_class=6)


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory, bank):
    out = tmp_path_factory.mktemp("small_synth")
    manifest, recipes = generate_dataset(SMALL, out, bank=bank)
    return out, manifest, recipes


def test_bank_instances_are_rms_normalized(bank):
    for class_name in bank.classes:
        for wave in bank.instances[class_name]:
            rms = float(np.sqrt(np.mean(wave ** 2)))
            assert rms == pytest.approx(bank.rms, rel=1e-9)


def test_bank_spectral_peaks_sit_in_class_bands(bank):
    for class_name, (low, high) in bank.class_bands.items():
        for wave in bank.instances[class_name]:
            spectrum = np.abs(np.fft.rfft(wave))
            peak_hz = np.fft.rfftfreq(wave.size, d=1.0 / bank.sample_rate)[np.argmax(spectrum)]
            assert low <= peak_hz <= high, f"{class_name} peak at {peak_hz:.0f} Hz"


def test_bank_deterministic():
    again = builtin_event_bank(seed=4, instances_per_class=6)
    fresh = builtin_event_bank(seed=4, instances_per_class=6)
    for class_name in again.classes:
        for a, b in zip(again.instances[class_name], fresh.instances[class_name]):
            assert np.array_equal(a, b)


def test_mixture_is_exact_sum_of_cuts(bank):
    recipe = MixtureRecipe(
        events=(
            RecipeEvent(class_name="tone", instance_index=0, cut_start=0.5,
                        cut_length=2.0, place=1.0),
            RecipeEvent(class_name="noise", instance_index=1, cut_start=0.0,
                        cut_length=1.5, place=2.0, gain=0.5),
        ),
        length_seconds=6.0,
        seed=0,
    )
    clip, annotations = synthesize_mixture(bank, recipe)
    sr = bank.sample_rate
    expected = np.zeros(6 * sr)
    tone = bank.instances["tone"][0]
    noise = bank.instances["noise"][1]
    expected[sr : sr + 2 * sr] += tone[sr // 2 : sr // 2 + 2 * sr]
    expected[2 * sr : 2 * sr + 3 * sr // 2] += 0.5 * noise[: 3 * sr // 2]
    assert np.array_equal(clip.samples, expected)
    assert [(a.class_name, a.onset, a.offset) for a in annotations] == [
        ("tone", 1.0, 3.0), ("noise", 2.0, 3.5)]


def test_noise_bed_is_seeded_and_scaled(bank):
    quiet = MixtureRecipe(events=(), length_seconds=4.0, seed=0,
                          noise_floor_rms=0.05, noise_seed=123)
    clip_a, _ = synthesize_mixture(bank, quiet)
    clip_b, _ = synthesize_mixture(bank, quiet)
    assert np.array_equal(clip_a.samples, clip_b.samples)
    assert float(np.sqrt(np.mean(clip_a.samples ** 2))) == pytest.approx(0.05, rel=1e-9)
    other = synthesize_mixture(bank, MixtureRecipe(
        events=(), length_seconds=4.0, seed=0, noise_floor_rms=0.05, noise_seed=124))[0]
    assert not np.array_equal(clip_a.samples, other.samples)


def test_recipe_bounds_validated(bank):
    bad_cut = MixtureRecipe(events=(RecipeEvent(
        class_name="tone", instance_index=0, cut_start=0.0, cut_length=99.0, place=0.0),),
        length_seconds=120.0, seed=0)
    with pytest.raises(RecipeError):
        synthesize_mixture(bank, bad_cut)
    bad_class = MixtureRecipe(events=(RecipeEvent(
        class_name="whale", instance_index=0, cut_start=0.0, cut_length=1.0, place=0.0),),
        length_seconds=4.0, seed=0)
    with pytest.raises(RecipeError):
        synthesize_mixture(bank, bad_class)


def test_generate_dataset_is_deterministic(tmp_path, bank, small_dataset):
    out_a, _, _ = small_dataset
    out_b = tmp_path / "again"
    generate_dataset(SMALL, out_b, bank=bank)
    for rel in ("manifest.tsv", "recipes.json", "audio/mix_0000.wav", "ann/mix_0003.tsv"):
        a = hashlib.sha256((out_a / rel).read_bytes()).hexdigest()
        b = hashlib.sha256((out_b / rel).read_bytes()).hexdigest()
        assert a == b, rel


def test_polyphony_cap_respected(small_dataset):
    _, _, recipes = small_dataset
    for recipe in recipes:
        spans = [(e.place, e.place + e.cut_length) for e in recipe.events]
        for onset, _ in spans:
            overlap = sum(1 for a, b in spans if a <= onset < b)
            assert overlap <= SMALL.polyphony_max


def test_roles_partition_recordings(small_dataset):
    out, manifest, _ = small_dataset
    roles = [entry.role_in_fold(0) for entry in manifest.recordings]
    assert set(roles) == {"train", "val", "test"}
    counts = {role: roles.count(role) for role in set(roles)}
    assert counts["train"] >= counts["val"]
    assert counts["train"] >= counts["test"]


def test_split_roles_never_share_instances(small_dataset):
    out, manifest, recipes = small_dataset
    role_of = {e.rec_id: e.role_in_fold(0) for e in manifest.recordings}
    used: dict[str, dict[str, set[int]]] = {}
    dump = json.loads((out / "recipes.json").read_text())
    for entry in dump:
        role = role_of[entry["rec_id"]]
        for ev in entry["events"]:
            used.setdefault(ev["class_name"], {}).setdefault(role, set()).add(ev["instance_index"])
    for class_name, by_role in used.items():
        for role_a in by_role:
            for role_b in by_role:
                if role_a < role_b:
                    shared = by_role[role_a] & by_role[role_b]
                    assert not shared, f"{class_name}: {role_a}/{role_b} share {shared}"


def test_annotations_match_recipes(small_dataset):
    out, manifest, recipes = small_dataset
    dump = json.loads((out / "recipes.json").read_text())
    from sed_forge.events import read_annotation_file
    for entry, recipe in zip(manifest.recordings, dump):
        events = read_annotation_file(out / entry.annotation_path)
        expected = sorted(
            (ev["place"], ev["place"] + ev["cut_length"], ev["class_name"])
            for ev in recipe["events"])
        got = sorted((e.onset, e.offset, e.class_name) for e in events)
        assert got == pytest.approx(expected)


def test_folds_2_rejected():
    with pytest.raises(ConfigError):
        SynthConfig(folds=2)


def test_fold_rotation_covers_all_roles():
    config = SynthConfig(num_mixtures=9, mixture_seconds=6.0, events_min=1, events_max=2,
                         min_cut=1.0, max_cut=3.0, instances_per_class=6, folds=3, seed=1)
    from sed_forge.synth import _group_roles
    table = [_group_roles(g, config) for g in range(3)]
    for fold in range(3):
        roles = [table[g][fold] for g in range(3)]
        assert sorted(roles) == ["test", "train", "val"]


@given(st.integers(3, 60))
def test_split_counts_partition(total):
    counts = _split_counts(total, (0.6, 0.2, 0.2))
    assert sum(counts) == total
    assert all(c >= 1 for c in counts)
    assert counts[0] >= max(counts[1], counts[2])


def test_negative_noise_floor_rejected():
    with pytest.raises(ConfigError):
        SynthConfig(noise_floor_rms=-0.1)
