"""Published corpus sizes the loaders validate against.

These are external facts about the upstream datasets, used only by
validate_manifest to check a downloaded copy; nothing at desk scale
depends on them.
"""

from __future__ import annotations

CORPUS_CONSTANTS: dict[str, int | float] = {
    "wavcaps_total": 403_050,
    "wavcaps_freesound": 262_300,
    "wavcaps_bbc": 31_201,
    "wavcaps_soundbible": 1_231,
    "wavcaps_audioset_strong": 108_317,
    "minigpt4_instructions": 3_439,
    "llava_total": 158_000,
    "llava_conversation": 58_000,
    "llava_detail": 23_000,
    "llava_reasoning": 77_000,
    "clotho_detail_items": 3_938,
    "clotho_detail_mean_words": 52.70,
    "vggss_instructions": 5_158,
    "pretrain_image_text_pairs": 130_000_000,
}

CAPTIONS_PER_AUDIO = 5
