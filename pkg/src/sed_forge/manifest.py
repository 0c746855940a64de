"""Dataset manifests: which recordings exist, their scenes, and fold roles.

File format (tab-separated, one record per line):

    format<TAB>sed-forge-manifest<TAB>1
    sample_rate<TAB>16000
    folds<TAB>4
    classes<TAB>chirp,noise,tone
    recording<TAB><id><TAB><audio path><TAB><annotation path><TAB><scene><TAB><roles>

Paths are relative to the manifest file. <roles> is a comma-separated list
with one entry per fold, each "train", "val", or "test".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ManifestError

FORMAT_NAME = "sed-forge-manifest"
FORMAT_VERSION = 1
ROLES = ("train", "val", "test")


@dataclass(frozen=True)
class RecordingEntry:
    rec_id: str
    audio_path: str
    annotation_path: str
    scene: str
    roles: tuple[str, ...]  # one per fold

    def role_in_fold(self, fold: int) -> str:
        return self.roles[fold]


@dataclass
class DatasetManifest:
    classes: tuple[str, ...]
    num_folds: int
    sample_rate: int
    recordings: list[RecordingEntry]
    base_dir: Path | None = None

    def audio_file(self, entry: RecordingEntry) -> Path:
        base = self.base_dir if self.base_dir is not None else Path(".")
        return base / entry.audio_path

    def annotation_file(self, entry: RecordingEntry) -> Path:
        base = self.base_dir if self.base_dir is not None else Path(".")
        return base / entry.annotation_path

    def fold_split(self, fold: int) -> dict:
        """Recordings grouped by role for one fold."""
        if not 0 <= fold < self.num_folds:
            raise ManifestError(f"fold {fold} out of range (manifest has {self.num_folds})")
        split = {role: [] for role in ROLES}
        for entry in self.recordings:
            split[entry.role_in_fold(fold)].append(entry)
        return split

    def validate(self) -> None:
        """Raise unless every fold has all three roles and entries are sane."""
        if not self.recordings:
            raise ManifestError("manifest lists no recordings")
        if self.num_folds < 1:
            raise ManifestError(f"num_folds must be at least 1, got {self.num_folds}")
        seen = set()
        for entry in self.recordings:
            if entry.rec_id in seen:
                raise ManifestError(f"duplicate recording id {entry.rec_id!r}")
            seen.add(entry.rec_id)
            if len(entry.roles) != self.num_folds:
                raise ManifestError(
                    f"{entry.rec_id}: {len(entry.roles)} roles for {self.num_folds} folds"
                )
            for role in entry.roles:
                if role not in ROLES:
                    raise ManifestError(f"{entry.rec_id}: unknown role {role!r}")
        for fold in range(self.num_folds):
            split = self.fold_split(fold)
            for role in ROLES:
                if not split[role]:
                    raise ManifestError(f"fold {fold} has no {role} recordings")


def write_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    lines = [
        f"format\t{FORMAT_NAME}\t{FORMAT_VERSION}",
        f"sample_rate\t{manifest.sample_rate}",
        f"folds\t{manifest.num_folds}",
        f"classes\t{','.join(manifest.classes)}",
    ]
    for entry in manifest.recordings:
        lines.append(
            "recording\t"
            + "\t".join(
                (entry.rec_id, entry.audio_path, entry.annotation_path, entry.scene,
                 ",".join(entry.roles))
            )
        )
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    header: dict[str, str] = {}
    recordings: list[RecordingEntry] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        key = parts[0]
        if key == "recording":
            if len(parts) != 6:
                raise ManifestError(f"{path}:{lineno}: recording line needs 6 fields")
            _, rec_id, audio_path, ann_path, scene, roles_text = parts
            recordings.append(
                RecordingEntry(
                    rec_id=rec_id,
                    audio_path=audio_path,
                    annotation_path=ann_path,
                    scene=scene,
                    roles=tuple(roles_text.split(",")),
                )
            )
        elif len(parts) >= 2:
            header[key] = parts[1] if key != "format" else "\t".join(parts[1:])
        else:
            raise ManifestError(f"{path}:{lineno}: malformed line {raw!r}")
    if header.get("format", "").split("\t")[0] != FORMAT_NAME:
        raise ManifestError(f"{path}: not a {FORMAT_NAME} file")
    try:
        manifest = DatasetManifest(
            classes=tuple(header["classes"].split(",")),
            num_folds=int(header["folds"]),
            sample_rate=int(header["sample_rate"]),
            recordings=recordings,
            base_dir=path.parent,
        )
    except KeyError as exc:
        raise ManifestError(f"{path}: missing header field {exc.args[0]!r}") from exc
    manifest.validate()
    return manifest
