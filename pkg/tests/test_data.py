"""Dataset manifests, the on-disk store, and the instruction builders."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundchat.data import (
    CORPUS_CONSTANTS,
    CaptionBundle,
    CaptionedMedia,
    DatasetKind,
    DatasetManifest,
    LOCALIZATION_INSTRUCTIONS,
    MediaStore,
    RELATEDNESS_INSTRUCTIONS,
    SOUND_TEMPLATES,
    build_clotho_detail,
    build_negative_pairs,
    build_vggss_instructions,
    caption_coverage,
    description_samples,
    description_violations,
    load_dataset,
    measure_description_file,
    measure_record_count,
    negative_response,
    negative_response_violations,
    pool_from_samples,
    report_ok,
    sample_kind,
    validate_manifest,
    write_dataset,
)
from groundchat.errors import ConfigError, InputError
from groundchat.fixtures import demo_audio, demo_image
from groundchat.grounding.mocks import CannedTextLLM, FailingAdapter, ScriptedTextLLM
from groundchat.types import (
    InstructionSample,
    MediaFormat,
    MediaRef,
    Modality,
    validate_sample,
)

# Known-good assembly case: five annotator captions for one clip and a
# reference paragraph that merges them.
FLIPPING_CAPTIONS = (
    "A person is turning a map over and over.",
    "A person is very carefully wrapping a gift for someone else.",
    "A person is very carefully wrapping a gift for someone else.",
    "He sighed as he turned the pages of the book, stopping to scan the information.",
    "Papers are being turned, stopped, then turned again, and someone is breathing.",
)
FLIPPING_PARAGRAPH = (
    "A person is repeatedly flipping some papers. They might be reading a book, "
    "flipping through a map, or wrapping presents. Judging from the repeated "
    "flipping sounds, they are concentrating on repeating this action."
)


def aref(name: str) -> MediaRef:
    return MediaRef(kind=Modality.AUDIO, format=MediaFormat.WAV, uri=name)


def iref(name: str) -> MediaRef:
    return MediaRef(kind=Modality.IMAGE, format=MediaFormat.PNG, uri=name)


def bundle(name: str = "clip.wav", captions=FLIPPING_CAPTIONS) -> CaptionBundle:
    return CaptionBundle(audio=aref(name), captions=tuple(captions))


class TestCaptionBundle:
    def test_holds_five_captions(self):
        assert len(bundle().captions) == 5

    def test_wrong_count_rejected(self):
        with pytest.raises(ValueError, match="5 captions"):
            CaptionBundle(audio=aref("a.wav"), captions=("one", "two"))

    def test_blank_caption_rejected(self):
        captions = FLIPPING_CAPTIONS[:4] + ("   ",)
        with pytest.raises(ValueError, match="non-empty"):
            CaptionBundle(audio=aref("a.wav"), captions=captions)

    def test_image_reference_rejected(self):
        with pytest.raises(ValueError, match="audio"):
            CaptionBundle(audio=iref("a.png"), captions=FLIPPING_CAPTIONS)


class TestDescriptionChecks:
    def test_reference_paragraph_passes(self):
        assert description_violations(FLIPPING_PARAGRAPH, FLIPPING_CAPTIONS) == []

    def test_reference_paragraph_covers_every_caption(self):
        assert caption_coverage(FLIPPING_PARAGRAPH, FLIPPING_CAPTIONS) == 5

    def test_short_text_fails(self):
        violations = description_violations("Papers flip.", FLIPPING_CAPTIONS)
        assert any("words" in v for v in violations)

    def test_multiple_paragraphs_fail(self):
        text = FLIPPING_PARAGRAPH.replace(". They", ".\nThey")
        violations = description_violations(text, FLIPPING_CAPTIONS)
        assert any("single paragraph" in v for v in violations)

    def test_unrelated_text_fails_coverage(self):
        text = " ".join(["Unrelated filler sentence about absolutely nothing真."] * 10)
        violations = description_violations(text, FLIPPING_CAPTIONS)
        assert any("covers" in v for v in violations)

    def test_empty_text_fails(self):
        assert description_violations("   ", FLIPPING_CAPTIONS) == ["description is empty"]


class TestBuildClothoDetail:
    def test_good_reply_stored_verbatim(self):
        records = build_clotho_detail([bundle()], CannedTextLLM(FLIPPING_PARAGRAPH))
        assert len(records) == 1
        rec = records[0]
        assert rec.description == FLIPPING_PARAGRAPH
        assert not rec.flagged
        assert rec.attempts == 1
        assert rec.coverage == 5

    def test_empty_reply_retried_then_accepted(self):
        llm = ScriptedTextLLM(["", FLIPPING_PARAGRAPH])
        records = build_clotho_detail([bundle()], llm)
        assert records[0].attempts == 2
        assert not records[0].flagged
        assert records[0].description == FLIPPING_PARAGRAPH

    def test_two_bad_replies_flag_the_bundle(self):
        llm = ScriptedTextLLM(["", "still nothing useful", FLIPPING_PARAGRAPH])
        records = build_clotho_detail([bundle("a.wav"), bundle("b.wav")], llm)
        assert records[0].flagged
        assert records[0].attempts == 2
        # the build moved on and the next bundle succeeded
        assert not records[1].flagged

    def test_adapter_failure_flags_and_continues(self):
        records = build_clotho_detail(
            [bundle("a.wav"), bundle("b.wav")], FailingAdapter()
        )
        assert [r.flagged for r in records] == [True, True]
        assert all(r.description == "" for r in records)

    def test_one_record_per_bundle(self):
        bundles = [bundle(f"clip{i}.wav") for i in range(7)]
        records = build_clotho_detail(bundles, CannedTextLLM(FLIPPING_PARAGRAPH))
        assert [r.audio.uri for r in records] == [b.audio.uri for b in bundles]

    def test_prompt_includes_captions_and_examples(self):
        prompts = []

        def capture(prompt):
            prompts.append(prompt)
            return FLIPPING_PARAGRAPH

        build_clotho_detail(
            [bundle()],
            CannedTextLLM(capture),
            few_shot=[(("c1", "c2", "c3", "c4", "c5"), "example description")],
        )
        assert FLIPPING_CAPTIONS[0] in prompts[0]
        assert "example description" in prompts[0]

    def test_template_needs_captions_placeholder(self):
        with pytest.raises(ConfigError, match="captions"):
            build_clotho_detail([bundle()], CannedTextLLM("x"), template="no slots")

    def test_few_shot_needs_examples_placeholder(self):
        with pytest.raises(ConfigError, match="examples"):
            build_clotho_detail(
                [bundle()],
                CannedTextLLM("x"),
                few_shot=[(("a", "b", "c", "d", "e"), "desc")],
                template="Captions: {captions}",
            )

    def test_description_samples_skip_flagged(self):
        llm = ScriptedTextLLM(["", "", FLIPPING_PARAGRAPH])
        records = build_clotho_detail([bundle("a.wav"), bundle("b.wav")], llm)
        samples = description_samples(records)
        assert len(samples) == 1
        assert samples[0].audio.uri == "b.wav"
        assert samples[0].image is None
        assert samples[0].response == FLIPPING_PARAGRAPH
        assert samples[0].related


class TestVggssBuilder:
    PAIRS = [
        ("dog_bark.wav", "dog.png", "dog barking"),
        ("cat.wav", "cat.jpg", "cat meowing"),
        ("train.wav", "train.png", "train passing"),
    ]

    def test_label_inlined_into_template(self):
        samples = build_vggss_instructions(
            [("dog_bark.wav", "dog.png", "dog barking")],
            templates=("The sound of {label} can be heard in this scene.",),
            seed=0,
        )
        assert samples[0].response == "The sound of dog barking can be heard in this scene."

    def test_bijection(self):
        samples = build_vggss_instructions(self.PAIRS, seed=3)
        assert len(samples) == len(self.PAIRS)
        assert [s.audio.uri for s in samples] == [p[0] for p in self.PAIRS]
        assert [s.image.uri for s in samples] == [p[1] for p in self.PAIRS]

    def test_instruction_from_localization_family(self):
        for s in build_vggss_instructions(self.PAIRS, seed=1):
            assert s.instruction in LOCALIZATION_INSTRUCTIONS
            assert s.related

    def test_every_sample_validates(self):
        for s in build_vggss_instructions(self.PAIRS, seed=2):
            assert validate_sample(s) == []

    def test_deterministic_under_seed(self):
        a = build_vggss_instructions(self.PAIRS, seed=9)
        b = build_vggss_instructions(self.PAIRS, seed=9)
        assert a == b

    def test_round_robin_uses_every_template(self):
        pairs = [(f"a{i}.wav", f"i{i}.png", f"thing {i}") for i in range(8)]
        samples = build_vggss_instructions(pairs, seed=0)
        used = set()
        for s, (_, _, label) in zip(samples, pairs):
            used.add(s.response.replace(label, "{label}"))
        assert used == set(SOUND_TEMPLATES)

    def test_template_without_placeholder_rejected(self):
        with pytest.raises(ConfigError, match="label"):
            build_vggss_instructions(self.PAIRS, templates=("no slot here",))

    def test_empty_template_list_rejected(self):
        with pytest.raises(ConfigError):
            build_vggss_instructions(self.PAIRS, templates=())

    def test_unknown_media_suffix_rejected(self):
        with pytest.raises(InputError, match="format"):
            build_vggss_instructions([("clip.xyz", "dog.png", "dog")])

    def test_wrong_kind_reference_rejected(self):
        with pytest.raises(InputError, match="audio"):
            build_vggss_instructions([(iref("dog.png"), iref("dog.png"), "dog")])

    def test_empty_label_rejected(self):
        with pytest.raises(InputError, match="label"):
            build_vggss_instructions([("a.wav", "b.png", "  ")])

    def test_media_ref_inputs_pass_through(self):
        audio, image = aref("x.wav"), iref("y.png")
        samples = build_vggss_instructions([(audio, image, "waves")], seed=0)
        assert samples[0].audio is audio
        assert samples[0].image is image


def audio_pool(*captions, source=None):
    return [
        CaptionedMedia(ref=aref(f"a{i}.wav"), caption=c, source_id=source)
        for i, c in enumerate(captions)
    ]


def image_pool(*captions, source=None):
    return [
        CaptionedMedia(ref=iref(f"i{i}.png"), caption=c, source_id=source)
        for i, c in enumerate(captions)
    ]


class TestNegativeResponse:
    def test_plain_captions(self):
        assert (
            negative_response("a dog on grass", "rain falling")
            == "The image shows a dog on grass. The audio is rain falling."
        )

    def test_existing_prefixes_not_doubled(self):
        out = negative_response("The image shows a lake.", "the audio is wind howling")
        assert out == "The image shows a lake. The audio is wind howling."

    def test_capitalized_caption_lowered(self):
        out = negative_response("A red boat.", "Rain falls!")
        assert out == "The image shows a red boat. The audio is rain falls."

    def test_structure_checks(self):
        good = negative_response("a dog", "a tone")
        assert negative_response_violations(good) == []
        assert negative_response_violations("Wrong start. The audio is x.")
        assert negative_response_violations(
            "The image shows x. The audio is y. The audio is z."
        )
        assert negative_response_violations("The image shows x and The audio thing.")


class TestNegativePairs:
    def test_worked_example(self):
        samples = build_negative_pairs(
            audio_pool("rain falling"), image_pool("a dog on grass"), count=1, seed=0
        )
        assert samples[0].response == "The image shows a dog on grass. The audio is rain falling."
        assert samples[0].related is False
        assert samples[0].instruction in RELATEDNESS_INSTRUCTIONS

    def test_seed7_hundred_samples_deterministic_and_valid(self):
        audios = audio_pool("rain falling", "a dog barking", "waves crashing", "an engine idling")
        images = image_pool("a dog on grass", "a city street", "a mountain lake")
        runs = [
            build_negative_pairs(audios, images, count=100, seed=7) for _ in range(2)
        ]
        assert runs[0] == runs[1]
        assert len(runs[0]) == 100
        for s in runs[0]:
            assert validate_sample(s) == []
            assert negative_response_violations(s.response) == []
            assert s.related is False

    def test_different_seeds_differ(self):
        audios = audio_pool("rain", "wind", "birdsong", "thunder")
        images = image_pool("a barn", "a pier", "a forest")
        assert build_negative_pairs(audios, images, 20, seed=1) != build_negative_pairs(
            audios, images, 20, seed=2
        )

    def test_shared_source_rejected(self):
        audios = audio_pool("a saw buzzing", source="vid1")
        images = [
            CaptionedMedia(ref=iref("same.png"), caption="a saw", source_id="vid1"),
            CaptionedMedia(ref=iref("other.png"), caption="a field", source_id="vid2"),
        ]
        samples = build_negative_pairs(audios, images, count=30, seed=5)
        assert all(s.image.uri == "other.png" for s in samples)

    def test_exhaustion_raises(self):
        audios = audio_pool("a saw buzzing", source="vid1")
        images = image_pool("a saw", source="vid1")
        with pytest.raises(InputError, match="retries"):
            build_negative_pairs(audios, images, count=1, seed=0)

    def test_preconditions(self):
        audios, images = audio_pool("x"), image_pool("y")
        with pytest.raises(InputError, match="count"):
            build_negative_pairs(audios, images, count=0, seed=0)
        with pytest.raises(InputError, match="non-empty"):
            build_negative_pairs([], images, count=1, seed=0)
        with pytest.raises(InputError, match="non-empty"):
            build_negative_pairs(audios, [], count=1, seed=0)

    def test_pool_kind_checked(self):
        with pytest.raises(InputError, match="audio pool"):
            build_negative_pairs(image_pool("x"), image_pool("y"), count=1, seed=0)
        with pytest.raises(InputError, match="image pool"):
            build_negative_pairs(audio_pool("x"), audio_pool("y"), count=1, seed=0)

    def test_pool_from_samples(self):
        samples = [
            InstructionSample(
                image=iref("a.png"), audio=None, instruction="i", response="a room"
            ),
            InstructionSample(
                image=None, audio=aref("b.wav"), instruction="i", response="a hum"
            ),
        ]
        images = pool_from_samples(samples, Modality.IMAGE)
        audios = pool_from_samples(samples, Modality.AUDIO)
        assert [p.caption for p in images] == ["a room"]
        assert [p.caption for p in audios] == ["a hum"]

    caption_words = st.lists(
        st.sampled_from("dog cat rain wind street lake red old quiet loud".split()),
        min_size=1, max_size=6,
    ).map(" ".join)

    @settings(max_examples=60, deadline=None)
    @given(
        audio_caps=st.lists(caption_words, min_size=1, max_size=4),
        image_caps=st.lists(caption_words, min_size=1, max_size=4),
        count=st.integers(min_value=1, max_value=8),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_property_structure_and_determinism(self, audio_caps, image_caps, count, seed):
        audios = audio_pool(*audio_caps)
        images = image_pool(*image_caps)
        first = build_negative_pairs(audios, images, count, seed)
        assert first == build_negative_pairs(audios, images, count, seed)
        for s in first:
            assert s.response.startswith("The image")
            assert s.response.count("The audio") == 1
            assert ". The audio" in s.response
            assert validate_sample(s) == []


class TestManifest:
    def test_invariants(self):
        with pytest.raises(ValueError, match="positive"):
            DatasetManifest(name="x", kind=DatasetKind.IMAGE_TEXT, count=0)
        with pytest.raises(ValueError, match="name"):
            DatasetManifest(name="", kind=DatasetKind.IMAGE_TEXT, count=1)

    def test_fixture_count_passes(self):
        manifest = DatasetManifest(name="demo", kind=DatasetKind.IMAGE_TEXT, count=10)
        report = validate_manifest(manifest, 10)
        assert report_ok(report)

    def test_count_mismatch_is_report_entry_not_error(self):
        manifest = DatasetManifest(name="demo", kind=DatasetKind.IMAGE_TEXT, count=10)
        report = validate_manifest(manifest, 11)
        assert not report_ok(report)
        entry = report[0]
        assert entry.field == "count"
        assert (entry.expected, entry.actual) == (11, 10)
        assert "MISMATCH" in str(entry)

    def test_constants_table_lookup_by_name(self):
        manifest = DatasetManifest(
            name="vggss_instructions", kind=DatasetKind.AUDIO_IMAGE_TEXT, count=5158
        )
        assert report_ok(validate_manifest(manifest, CORPUS_CONSTANTS))
        short = DatasetManifest(
            name="vggss_instructions", kind=DatasetKind.AUDIO_IMAGE_TEXT, count=5000
        )
        assert not report_ok(validate_manifest(short, CORPUS_CONSTANTS))

    def test_unknown_name_is_unchecked(self):
        manifest = DatasetManifest(name="bespoke", kind=DatasetKind.AUDIO_TEXT, count=3)
        report = validate_manifest(manifest, CORPUS_CONSTANTS)
        assert report[0].expected is None
        assert report_ok(report)

    def test_sample_kind_classification(self):
        image_only = InstructionSample(image=iref("a.png"), audio=None,
                                       instruction="i", response="r")
        audio_only = InstructionSample(image=None, audio=aref("a.wav"),
                                       instruction="i", response="r")
        both = InstructionSample(image=iref("a.png"), audio=aref("a.wav"),
                                 instruction="i", response="r")
        assert sample_kind(image_only) is DatasetKind.IMAGE_TEXT
        assert sample_kind(audio_only) is DatasetKind.AUDIO_TEXT
        assert sample_kind(both) is DatasetKind.AUDIO_IMAGE_TEXT

    def test_kind_consistency_reported(self):
        manifest = DatasetManifest(name="d", kind=DatasetKind.AUDIO_TEXT, count=2)
        samples = [
            InstructionSample(image=None, audio=aref("a.wav"), instruction="i", response="r"),
            InstructionSample(image=iref("b.png"), audio=None, instruction="i", response="r"),
        ]
        report = validate_manifest(manifest, 2, samples=samples)
        mismatches = [e for e in report if e.field == "kind_mismatches"]
        assert mismatches[0].actual == 1
        assert not mismatches[0].ok

    def test_round_trip(self):
        manifest = DatasetManifest(
            name="neg", kind=DatasetKind.AUDIO_IMAGE_TEXT, count=4,
            sources=("pool_a", "pool_b"), checksum="sha256:ab",
        )
        assert DatasetManifest.from_dict(manifest.to_dict()) == manifest


class TestStore:
    def samples(self):
        return build_negative_pairs(
            audio_pool("rain falling", "a dog barking"),
            image_pool("a dog on grass", "a pier"),
            count=4, seed=7,
        )

    def test_write_then_load_round_trip(self, tmp_path):
        samples = self.samples()
        manifest = write_dataset(tmp_path, "neg", DatasetKind.AUDIO_IMAGE_TEXT, samples)
        assert manifest.count == 4
        assert manifest.checksum.startswith("sha256:")
        loaded_manifest, loaded = load_dataset(tmp_path, "neg")
        assert loaded_manifest == manifest
        assert loaded == samples

    def test_loaded_samples_all_validate(self, tmp_path):
        write_dataset(tmp_path, "neg", DatasetKind.AUDIO_IMAGE_TEXT, self.samples())
        _, loaded = load_dataset(tmp_path, "neg")
        assert all(validate_sample(s) == [] for s in loaded)

    def test_tampered_data_rejected(self, tmp_path):
        write_dataset(tmp_path, "neg", DatasetKind.AUDIO_IMAGE_TEXT, self.samples())
        data_file = tmp_path / "neg.ldjson"
        data_file.write_bytes(data_file.read_bytes().replace(b"dog", b"cat"))
        with pytest.raises(InputError, match="checksum"):
            load_dataset(tmp_path, "neg")

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="manifest"):
            load_dataset(tmp_path, "nope")

    def test_unknown_format_version_rejected(self, tmp_path):
        write_dataset(tmp_path, "neg", DatasetKind.AUDIO_IMAGE_TEXT, self.samples())
        header_path = tmp_path / "neg.manifest.json"
        header = json.loads(header_path.read_text())
        header["format_version"] = 99
        header_path.write_text(json.dumps(header))
        with pytest.raises(ConfigError, match="version"):
            load_dataset(tmp_path, "neg")

    def test_count_disagreement_rejected(self, tmp_path):
        write_dataset(tmp_path, "neg", DatasetKind.AUDIO_IMAGE_TEXT, self.samples())
        header_path = tmp_path / "neg.manifest.json"
        header = json.loads(header_path.read_text())
        header["count"] = 9
        header["checksum"] = None
        header_path.write_text(json.dumps(header))
        with pytest.raises(InputError, match="manifest says 9"):
            load_dataset(tmp_path, "neg")

    def test_invalid_sample_line_rejected(self, tmp_path):
        bad = InstructionSample(image=iref("a.png"), audio=None,
                                instruction="i", response="")
        write_dataset(tmp_path, "bad", DatasetKind.IMAGE_TEXT, [bad])
        with pytest.raises(InputError, match="response"):
            load_dataset(tmp_path, "bad")

    def test_empty_dataset_refused(self, tmp_path):
        with pytest.raises(InputError, match="empty"):
            write_dataset(tmp_path, "x", DatasetKind.IMAGE_TEXT, [])

    def test_media_store_round_trip(self, tmp_path):
        store = MediaStore(tmp_path)
        image = demo_image()
        ref = store.put(image)
        assert ref.digest == image.digest
        assert store.contains(image.digest)
        out = store.get(ref)
        assert out.payload == image.payload
        assert out.format is MediaFormat.PNG
        assert out.kind is Modality.IMAGE

    def test_media_store_put_is_idempotent(self, tmp_path):
        store = MediaStore(tmp_path)
        audio = demo_audio()
        assert store.put(audio) == store.put(audio)
        assert len(list(store.objects.iterdir())) == 1

    def test_media_store_unknown_digest(self, tmp_path):
        with pytest.raises(InputError, match="unknown"):
            MediaStore(tmp_path).get("0" * 64)

    def test_media_store_detects_corruption(self, tmp_path):
        store = MediaStore(tmp_path)
        image = demo_image()
        store.put(image)
        path = next(store.objects.glob(f"{image.digest}.*"))
        path.write_bytes(b"\x89PNG-not-really")
        with pytest.raises(InputError, match="corrupt"):
            store.get(image.digest)


class TestMeasurement:
    def test_list_of_records(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text(json.dumps([
            {"audio_id": "a", "caption": "one two three"},
            {"audio_id": "b", "caption": "four five"},
        ]))
        count, mean = measure_description_file(path)
        assert count == 2
        assert mean == pytest.approx(2.5)

    def test_wrapped_record_list(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text(json.dumps({"annotations": [{"caption": "a b c d"}]}))
        assert measure_description_file(path) == (1, 4.0)
        assert measure_record_count(path) == 1

    def test_alternate_text_keys(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text(json.dumps([{"description": "x y"}, {"text": "z"}]))
        _, mean = measure_description_file(path)
        assert mean == pytest.approx(1.5)

    def test_malformed_file_rejected(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text("{not json")
        with pytest.raises(InputError, match="cannot read"):
            measure_description_file(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text("[]")
        with pytest.raises(InputError, match="no records"):
            measure_description_file(path)

    def test_textless_record_rejected(self, tmp_path):
        path = tmp_path / "file.json"
        path.write_text(json.dumps([{"id": 3}]))
        with pytest.raises(InputError, match="no description text"):
            measure_description_file(path)
