"""A small self-describing binary container for package artifacts.

Layout (header lines are ASCII, terminated by a single newline):

    SEDFORGE <kind> <version>
    meta <nbytes>
    <UTF-8 JSON, sorted keys>
    blob <name> <dtype> <shape> <nbytes>
    <raw little-endian array bytes>
    ...
    end

Feature caches, event-roll dumps, model files, and training checkpoints all
use this layout and differ only in their kind tag and blob names. Blobs are
written in sorted name order so equal content gives equal bytes.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .errors import CorruptFileError, UnsupportedVersionError

MAGIC = b"SEDFORGE"
FORMAT_VERSION = 1

_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


def _shape_token(shape: tuple[int, ...]) -> str:
    return ",".join(str(d) for d in shape) if shape else "-"


def _parse_shape(token: str) -> tuple[int, ...]:
    if token == "-":
        return ()
    try:
        return tuple(int(d) for d in token.split(","))
    except ValueError as exc:
        raise CorruptFileError(f"bad shape token {token!r}") from exc


def write_container(path: str | Path, kind: str, meta: dict, blobs: dict[str, np.ndarray]) -> None:
    if not _NAME_RE.match(kind):
        raise ValueError(f"invalid container kind {kind!r}")
    for name in blobs:
        if not _NAME_RE.match(name):
            raise ValueError(f"invalid blob name {name!r}")
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + f" {kind} {FORMAT_VERSION}\n".encode("ascii"))
        fh.write(f"meta {len(meta_bytes)}\n".encode("ascii"))
        fh.write(meta_bytes)
        for name in sorted(blobs):
            arr = np.ascontiguousarray(blobs[name])
            arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            raw = arr.tobytes()
            header = f"blob {name} {arr.dtype.str} {_shape_token(arr.shape)} {len(raw)}\n"
            fh.write(header.encode("ascii"))
            fh.write(raw)
        fh.write(b"end\n")


def _read_line(fh, path) -> str:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise CorruptFileError(f"{path}: truncated header line")
    try:
        return line[:-1].decode("ascii")
    except UnicodeDecodeError as exc:
        raise CorruptFileError(f"{path}: non-ASCII header line") from exc


def _read_exact(fh, nbytes: int, path) -> bytes:
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise CorruptFileError(f"{path}: expected {nbytes} bytes, got {len(raw)}")
    return raw


def read_container(path: str | Path, expect_kind: str | None = None) -> tuple[str, dict, dict[str, np.ndarray]]:
    """Read a container file; returns (kind, meta, blobs)."""
    with open(path, "rb") as fh:
        first = _read_line(fh, path)
        parts = first.split(" ")
        if len(parts) != 3 or parts[0].encode("ascii") != MAGIC:
            raise CorruptFileError(f"{path}: not a SEDFORGE container")
        kind = parts[1]
        try:
            version = int(parts[2])
        except ValueError as exc:
            raise CorruptFileError(f"{path}: bad version field {parts[2]!r}") from exc
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"{path}: format version {version} not supported (expected {FORMAT_VERSION})"
            )
        if expect_kind is not None and kind != expect_kind:
            raise CorruptFileError(f"{path}: container kind {kind!r}, expected {expect_kind!r}")

        meta_line = _read_line(fh, path).split(" ")
        if len(meta_line) != 2 or meta_line[0] != "meta":
            raise CorruptFileError(f"{path}: missing meta section")
        try:
            meta_len = int(meta_line[1])
        except ValueError as exc:
            raise CorruptFileError(f"{path}: bad meta length") from exc
        try:
            meta = json.loads(_read_exact(fh, meta_len, path).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptFileError(f"{path}: meta is not valid JSON") from exc

        blobs: dict[str, np.ndarray] = {}
        while True:
            line = _read_line(fh, path)
            if line == "end":
                break
            parts = line.split(" ")
            if len(parts) != 5 or parts[0] != "blob":
                raise CorruptFileError(f"{path}: malformed blob header {line!r}")
            name, dtype_str, shape_token, nbytes_token = parts[1:]
            if name in blobs:
                raise CorruptFileError(f"{path}: duplicate blob {name!r}")
            shape = _parse_shape(shape_token)
            try:
                dtype = np.dtype(dtype_str)
                nbytes = int(nbytes_token)
            except (TypeError, ValueError) as exc:
                raise CorruptFileError(f"{path}: bad blob header {line!r}") from exc
            expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
            if nbytes != expected:
                raise CorruptFileError(
                    f"{path}: blob {name!r} declares {nbytes} bytes but shape needs {expected}"
                )
            raw = _read_exact(fh, nbytes, path)
            blobs[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
        if fh.read(1):
            raise CorruptFileError(f"{path}: trailing bytes after end marker")
    return kind, meta, blobs
