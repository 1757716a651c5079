"""Dataset manifests and validation reports.

A manifest describes one dataset file: what it is, how many samples it
holds, where the raw material came from, and a checksum of the sample file.
Validation never raises on a mismatch; every comparison comes back as a
report entry so callers can print or log the whole picture at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..errors import InputError
from ..types import InstructionSample


class DatasetKind(str, Enum):
    IMAGE_TEXT = "image_text"
    AUDIO_TEXT = "audio_text"
    AUDIO_IMAGE_TEXT = "audio_image_text"


@dataclass(frozen=True)
class DatasetManifest:
    """Header record for one dataset file."""

    name: str
    kind: DatasetKind
    count: int
    sources: tuple[str, ...] = ()
    checksum: str | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("manifest name must be non-empty")
        if self.count <= 0:
            raise ValueError(f"manifest count must be positive, got {self.count}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "count": self.count,
            "sources": list(self.sources),
            "checksum": self.checksum,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DatasetManifest":
        return cls(
            name=d["name"],
            kind=DatasetKind(d["kind"]),
            count=d["count"],
            sources=tuple(d.get("sources", ())),
            checksum=d.get("checksum"),
        )


@dataclass(frozen=True)
class CheckEntry:
    """One line of a validation report; ``expected is None`` means unchecked."""

    field: str
    expected: int | float | None
    actual: int | float
    ok: bool

    def __str__(self) -> str:
        status = "ok" if self.ok else "MISMATCH"
        return f"{self.field}: expected {self.expected}, got {self.actual} [{status}]"


def sample_kind(sample: InstructionSample) -> DatasetKind | None:
    """The dataset kind a sample belongs to, or None for a modality-free one."""
    if sample.image is not None and sample.audio is not None:
        return DatasetKind.AUDIO_IMAGE_TEXT
    if sample.image is not None:
        return DatasetKind.IMAGE_TEXT
    if sample.audio is not None:
        return DatasetKind.AUDIO_TEXT
    return None


def validate_manifest(
    manifest: DatasetManifest,
    expected: int | float | Mapping[str, int | float],
    samples: Sequence[InstructionSample] | None = None,
) -> list[CheckEntry]:
    """Compare a manifest (and optionally its samples) against expectations.

    ``expected`` is either the expected sample count or a mapping of dataset
    name to expected count, e.g. the published corpus-size table.  Mismatches
    become report entries, never exceptions.
    """
    if isinstance(expected, Mapping):
        want = expected.get(manifest.name)
    else:
        want = expected
    report = [
        CheckEntry("count", want, manifest.count, want is None or manifest.count == want)
    ]
    if samples is not None:
        report.append(
            CheckEntry("sample_lines", manifest.count, len(samples),
                       len(samples) == manifest.count)
        )
        mismatched = sum(1 for s in samples if sample_kind(s) is not manifest.kind)
        report.append(CheckEntry("kind_mismatches", 0, mismatched, mismatched == 0))
    return report


def report_ok(report: Sequence[CheckEntry]) -> bool:
    return all(entry.ok for entry in report)


# -- measurement of raw downloaded corpus files -------------------------------
#
# The upstream instruction files are plain JSON without a published schema:
# either a top-level list of records or a wrapper object holding one.  These
# helpers only count records and average description length, so they accept
# any of the common field names for the description text.

_TEXT_KEYS = ("caption", "description", "text", "response", "value")


def _records(path: Path | str) -> list[Any]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read dataset file {path}: {exc}") from exc
    if isinstance(payload, list):
        return payload
    if isinstance(payload, dict):
        for value in payload.values():
            if isinstance(value, list):
                return value
    raise InputError(f"no record list found in {path}")


def _record_text(record: Any) -> str:
    if isinstance(record, str):
        return record
    if isinstance(record, dict):
        for key in _TEXT_KEYS:
            value = record.get(key)
            if isinstance(value, str):
                return value
    raise InputError(f"record has no description text: {record!r:.120}")


def measure_description_file(path: Path | str) -> tuple[int, float]:
    """(record count, mean description length in words) of a caption file."""
    records = _records(path)
    if not records:
        raise InputError(f"dataset file {path} holds no records")
    words = [len(_record_text(r).split()) for r in records]
    return len(records), sum(words) / len(words)


def measure_record_count(path: Path | str) -> int:
    """Number of records in an instruction file."""
    return len(_records(path))
