import pytest

from sed_forge.errors import ManifestError
from sed_forge.manifest import (
    DatasetManifest,
    RecordingEntry,
    load_manifest,
    write_manifest,
)


def _entry(rec_id, roles):
    return RecordingEntry(
        rec_id=rec_id,
        audio_path=f"audio/{rec_id}.wav",
        annotation_path=f"ann/{rec_id}.tsv",
        scene="street",
        roles=roles,
    )


def _manifest(tmp_path, entries, num_folds=1):
    return DatasetManifest(
        classes=("a", "b"),
        num_folds=num_folds,
        sample_rate=16000,
        recordings=entries,
        base_dir=tmp_path,
    )


def test_roundtrip(tmp_path):
    manifest = _manifest(tmp_path, [
        _entry("r0", ("train",)), _entry("r1", ("val",)), _entry("r2", ("test",))])
    path = tmp_path / "manifest.tsv"
    write_manifest(path, manifest)
    back = load_manifest(path)
    assert back.classes == ("a", "b")
    assert back.sample_rate == 16000
    assert back.num_folds == 1
    assert [e.rec_id for e in back.recordings] == ["r0", "r1", "r2"]
    assert back.recordings[0].roles == ("train",)
    assert back.base_dir == path.parent


def test_fold_split_groups_by_role(tmp_path):
    manifest = _manifest(tmp_path, [
        _entry("r0", ("train",)), _entry("r1", ("train",)),
        _entry("r2", ("val",)), _entry("r3", ("test",))])
    split = manifest.fold_split(0)
    assert [e.rec_id for e in split["train"]] == ["r0", "r1"]
    assert [e.rec_id for e in split["val"]] == ["r2"]
    assert [e.rec_id for e in split["test"]] == ["r3"]
    with pytest.raises(ManifestError):
        manifest.fold_split(1)


def test_multi_fold_roles(tmp_path):
    manifest = _manifest(tmp_path, [
        _entry("r0", ("test", "train", "val")),
        _entry("r1", ("val", "test", "train")),
        _entry("r2", ("train", "val", "test"))], num_folds=3)
    assert manifest.recordings[0].role_in_fold(2) == "val"
    assert [e.rec_id for e in manifest.fold_split(1)["test"]] == ["r1"]


def test_validate_needs_all_roles(tmp_path):
    manifest = _manifest(tmp_path, [_entry("r0", ("train",)), _entry("r1", ("val",))])
    with pytest.raises(ManifestError, match="no test"):
        manifest.validate()


def test_validate_rejects_duplicates(tmp_path):
    manifest = _manifest(tmp_path, [
        _entry("r0", ("train",)), _entry("r0", ("val",)), _entry("r1", ("test",))])
    with pytest.raises(ManifestError, match="duplicate"):
        manifest.validate()


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "manifest.tsv"
    path.write_text("nonsense\n")
    with pytest.raises(ManifestError):
        load_manifest(path)
