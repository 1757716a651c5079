"""On-disk dataset layout: LDJSON sample files plus a content-addressed blob store.

Layout under a store root:

    objects/<digest>.<format>     raw media bytes, named by sha256
    <name>.ldjson                 one canonical-JSON sample per line
    <name>.manifest.json          DatasetManifest header + format version

The manifest checksum covers the LDJSON bytes, so a dataset that loads and
verifies is byte-identical to the one that was written.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import ConfigError, InputError
from ..types import (
    FORMATS_BY_MODALITY,
    InstructionSample,
    MediaFormat,
    MediaRef,
    Modality,
    ModalityInput,
    validate_sample,
)
from .manifest import DatasetKind, DatasetManifest

STORE_FORMAT_VERSION = 1

_MODALITY_BY_FORMAT: dict[MediaFormat, Modality] = {
    fmt: kind for kind, formats in FORMATS_BY_MODALITY.items() for fmt in formats
}


class MediaStore:
    """Content-addressed media files under ``root/objects``."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.objects = self.root / "objects"

    def _path(self, digest: str, fmt: MediaFormat) -> Path:
        return self.objects / f"{digest}.{fmt.value}"

    def put(self, item: ModalityInput) -> MediaRef:
        path = self._path(item.digest, item.format)
        if not path.exists():
            self.objects.mkdir(parents=True, exist_ok=True)
            path.write_bytes(item.payload)
        return item.ref(uri=path.name)

    def contains(self, digest: str) -> bool:
        return any(self.objects.glob(f"{digest}.*"))

    def get(self, ref: MediaRef | str) -> ModalityInput:
        digest = ref if isinstance(ref, str) else ref.digest
        if not digest:
            raise InputError("media reference carries no digest")
        hits = sorted(self.objects.glob(f"{digest}.*"))
        if not hits:
            raise InputError(f"unknown media digest {digest}")
        path = hits[0]
        try:
            fmt = MediaFormat(path.suffix.lstrip("."))
        except ValueError:
            raise InputError(f"stored media has unknown format: {path.name}")
        payload = path.read_bytes()
        if hashlib.sha256(payload).hexdigest() != digest:
            raise InputError(f"stored media corrupt for digest {digest}")
        return ModalityInput.from_bytes(_MODALITY_BY_FORMAT[fmt], payload, fmt)


def _sample_line(sample: InstructionSample) -> str:
    return json.dumps(sample.to_dict(), sort_keys=True, separators=(",", ":"))


def write_dataset(
    directory: Path | str,
    name: str,
    kind: DatasetKind,
    samples: Sequence[InstructionSample],
    sources: Iterable[str] = (),
) -> DatasetManifest:
    """Write samples as LDJSON plus a manifest header; returns the manifest."""
    if not samples:
        raise InputError("refusing to write an empty dataset")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = "".join(_sample_line(s) + "\n" for s in samples).encode("utf-8")
    (directory / f"{name}.ldjson").write_bytes(data)
    manifest = DatasetManifest(
        name=name,
        kind=kind,
        count=len(samples),
        sources=tuple(sources),
        checksum="sha256:" + hashlib.sha256(data).hexdigest(),
    )
    header = {"format_version": STORE_FORMAT_VERSION, **manifest.to_dict()}
    (directory / f"{name}.manifest.json").write_text(
        json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def load_dataset(
    directory: Path | str, name: str
) -> tuple[DatasetManifest, list[InstructionSample]]:
    """Load and verify a dataset written by write_dataset.

    ConfigError for a missing or malformed manifest; InputError when the data
    file disagrees with its header (checksum, count, sample validity).
    """
    directory = Path(directory)
    header_path = directory / f"{name}.manifest.json"
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
        version = header["format_version"]
        manifest = DatasetManifest.from_dict(header)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read manifest {header_path}: {exc}") from exc
    if version != STORE_FORMAT_VERSION:
        raise ConfigError(f"unsupported dataset format version {version}")

    data_path = directory / f"{name}.ldjson"
    try:
        data = data_path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read dataset file {data_path}: {exc}") from exc
    digest = "sha256:" + hashlib.sha256(data).hexdigest()
    if manifest.checksum and digest != manifest.checksum:
        raise InputError(f"dataset {name} checksum mismatch")

    samples = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line:
            continue
        try:
            sample = InstructionSample.from_dict(json.loads(line))
        except (ValueError, KeyError) as exc:
            raise InputError(f"{data_path}:{lineno}: bad sample record: {exc}") from exc
        violations = validate_sample(sample)
        if violations:
            raise InputError(f"{data_path}:{lineno}: {'; '.join(violations)}")
        samples.append(sample)
    if len(samples) != manifest.count:
        raise InputError(
            f"dataset {name} holds {len(samples)} samples, manifest says {manifest.count}"
        )
    return manifest, samples
