from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundchat.types import (
    BoundingBox,
    ChatTurn,
    EntityMatch,
    GroundedEntity,
    InstructionSample,
    MediaFormat,
    MediaRef,
    Modality,
    ModalityInput,
    Role,
    SegmentMask,
    Tag,
    TagSet,
    decode_json,
    encode_json,
    validate_sample,
)

PNG_STUB = b"\x89PNG-not-a-real-image"
WAV_STUB = b"RIFF-not-a-real-wave"


def image_ref() -> MediaRef:
    return MediaRef(kind=Modality.IMAGE, format=MediaFormat.PNG, digest="d" * 64)


def audio_ref() -> MediaRef:
    return MediaRef(kind=Modality.AUDIO, format=MediaFormat.WAV, digest="a" * 64)


class TestConstructionInvariants:
    def test_tag_rules(self):
        Tag("dog", 0.5)
        with pytest.raises(ValueError):
            Tag("", 0.5)
        with pytest.raises(ValueError):
            Tag("Dog", 0.5)
        with pytest.raises(ValueError):
            Tag("dog", 1.5)

    def test_tagset_rejects_duplicates_and_dedup_keeps_order(self):
        with pytest.raises(ValueError):
            TagSet((Tag("dog", 0.9), Tag("dog", 0.1)))
        ts = TagSet.dedup([Tag("dog", 0.9), Tag("cat", 0.8), Tag("dog", 0.1)])
        assert ts.labels == ("dog", "cat")

    def test_box_rules(self):
        BoundingBox(0, 0, 1, 1)
        with pytest.raises(ValueError):
            BoundingBox(2, 0, 1, 1)
        with pytest.raises(ValueError):
            BoundingBox(-1, 0, 1, 1)
        assert BoundingBox(0, 0, 4, 2).violations_for_image(3, 3)
        assert not BoundingBox(0, 0, 3, 3).violations_for_image(3, 3)

    def test_mask_counts_must_cover_bitmap(self):
        SegmentMask(2, 2, (4,))
        with pytest.raises(ValueError):
            SegmentMask(2, 2, (3,))
        with pytest.raises(ValueError):
            SegmentMask(0, 2, ())

    def test_modality_input_format_consistency(self):
        ModalityInput.from_bytes(Modality.IMAGE, PNG_STUB, MediaFormat.PNG)
        with pytest.raises(ValueError):
            ModalityInput.from_bytes(Modality.IMAGE, PNG_STUB, MediaFormat.WAV)
        with pytest.raises(ValueError):
            ModalityInput.from_bytes(Modality.AUDIO, b"", MediaFormat.WAV)

    def test_assistant_turns_carry_no_attachments(self):
        ChatTurn(Role.HUMAN, "look", (image_ref(),))
        with pytest.raises(ValueError):
            ChatTurn(Role.ASSISTANT, "ok", (image_ref(),))


class TestValidateSample:
    def test_valid_sample(self):
        sample = InstructionSample(
            image=image_ref(), audio=None, instruction="What is the image?",
            response="A dog.", related=True,
        )
        assert validate_sample(sample) == []

    def test_no_modalities(self):
        sample = InstructionSample(None, None, "hi", "ok")
        assert validate_sample(sample) == ["at least one modality required"]

    def test_empty_response(self):
        sample = InstructionSample(image_ref(), None, "hi", "")
        assert validate_sample(sample) == ["response non-empty"]

    def test_kind_mismatch_reported(self):
        sample = InstructionSample(image=audio_ref(), audio=None, instruction="x", response="y")
        assert "image: reference kind must be image" in validate_sample(sample)


class TestEntityInvariants:
    def test_mask_inside_dilated_box(self):
        bitmap = bytearray(100)
        for y in range(3, 7):
            for x in range(3, 7):
                bitmap[y * 10 + x] = 1
        mask = SegmentMask.from_bitmap(10, 10, bytes(bitmap))
        entity = GroundedEntity("dog", BoundingBox(3, 3, 7, 7), mask, 0.9)
        assert entity.violations(margin=2.0) == []
        tight = GroundedEntity("dog", BoundingBox(4, 4, 7, 7), mask, 0.9)
        assert tight.violations(margin=0.0)
        assert not tight.violations(margin=2.0)

    def test_match_violations(self):
        text = "A dog leaps."
        good = EntityMatch(0, (2, 5), "dog")
        assert good.violations(text, entity_count=1) == []
        assert EntityMatch(0, (2, 5), "cat").violations(text)
        assert EntityMatch(3, (2, 5), "dog").violations(text, entity_count=1)
        assert EntityMatch(0, (5, 99), "dog").violations(text)
        with pytest.raises(ValueError):
            EntityMatch(0, (5, 5), "x")


def sample_types():
    mask = SegmentMask.from_bitmap(4, 2, b"\x00\x01\x01\x00\x00\x01\x01\x00")
    return [
        Tag("dog", 0.75),
        TagSet((Tag("dog", 0.75), Tag("grass", 0.5))),
        BoundingBox(1.5, 2.0, 8.25, 9.0),
        mask,
        GroundedEntity("dog", BoundingBox(0, 0, 4, 2), mask, 0.9),
        GroundedEntity("cat", BoundingBox(0, 0, 4, 2), None, 0.4),
        EntityMatch(1, (3, 8), "leaps"),
        ModalityInput.from_bytes(Modality.IMAGE, PNG_STUB, MediaFormat.PNG),
        MediaRef(Modality.AUDIO, MediaFormat.FLAC, digest=None, uri="fixtures/a.flac"),
        InstructionSample(image_ref(), audio_ref(), "Relate them.", "The image ...", False),
        ChatTurn(Role.HUMAN, "What is this?", (image_ref(),)),
    ]


@pytest.mark.parametrize("obj", sample_types(), ids=lambda o: type(o).__name__)
def test_serialization_round_trip(obj):
    assert decode_json(type(obj), encode_json(obj)) == obj


@settings(max_examples=100)
@given(
    width=st.integers(min_value=1, max_value=64),
    height=st.integers(min_value=1, max_value=64),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_mask_rle_round_trip_property(width, height, seed):
    rng = random.Random(seed)
    bitmap = bytes(rng.choice((0, 1)) for _ in range(width * height))
    mask = SegmentMask.from_bitmap(width, height, bitmap)
    assert mask.to_bitmap() == bitmap
    assert mask.area == sum(bitmap)
    assert decode_json(SegmentMask, encode_json(mask)) == mask


def test_mask_digest_stable_and_distinct():
    a = SegmentMask.from_bitmap(2, 2, b"\x00\x01\x01\x00")
    b = SegmentMask.from_bitmap(2, 2, b"\x00\x01\x01\x00")
    c = SegmentMask.from_bitmap(2, 2, b"\x01\x01\x01\x00")
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()
