"""Dataset manifests, stores, and instruction-dataset builders."""

from .builders import (
    ASSEMBLY_PROMPT,
    AUDIO_DESCRIPTION_INSTRUCTION,
    LOCALIZATION_INSTRUCTIONS,
    MAX_NEGATIVE_RETRIES,
    MIN_CAPTION_COVERAGE,
    MIN_DESCRIPTION_WORDS,
    RELATEDNESS_INSTRUCTIONS,
    SOUND_TEMPLATES,
    CaptionBundle,
    CaptionedMedia,
    DescriptionRecord,
    as_media_ref,
    build_clotho_detail,
    build_negative_pairs,
    build_vggss_instructions,
    caption_coverage,
    description_samples,
    description_violations,
    negative_response,
    negative_response_violations,
    pool_from_samples,
)
from .constants import CAPTIONS_PER_AUDIO, CORPUS_CONSTANTS
from .manifest import (
    CheckEntry,
    DatasetKind,
    DatasetManifest,
    measure_description_file,
    measure_record_count,
    report_ok,
    sample_kind,
    validate_manifest,
)
from .store import MediaStore, STORE_FORMAT_VERSION, load_dataset, write_dataset

__all__ = [
    "ASSEMBLY_PROMPT",
    "AUDIO_DESCRIPTION_INSTRUCTION",
    "CAPTIONS_PER_AUDIO",
    "CORPUS_CONSTANTS",
    "CaptionBundle",
    "CaptionedMedia",
    "CheckEntry",
    "DatasetKind",
    "DatasetManifest",
    "DescriptionRecord",
    "LOCALIZATION_INSTRUCTIONS",
    "MAX_NEGATIVE_RETRIES",
    "MIN_CAPTION_COVERAGE",
    "MIN_DESCRIPTION_WORDS",
    "MediaStore",
    "RELATEDNESS_INSTRUCTIONS",
    "SOUND_TEMPLATES",
    "STORE_FORMAT_VERSION",
    "as_media_ref",
    "build_clotho_detail",
    "build_negative_pairs",
    "build_vggss_instructions",
    "caption_coverage",
    "description_samples",
    "description_violations",
    "load_dataset",
    "measure_description_file",
    "measure_record_count",
    "negative_response",
    "negative_response_violations",
    "pool_from_samples",
    "report_ok",
    "sample_kind",
    "validate_manifest",
    "write_dataset",
]
