"""HTTP contract of the chat service: sessions, messages, masks, errors."""

import pytest
from fastapi.testclient import TestClient

from groundchat.fixtures import (
    DEMO_REPLY,
    NEGATIVE_REPLY,
    RELATED_QUESTION,
    canned_replies,
    demo_adapters,
    demo_image,
    demo_audio,
    overfit_quad,
)
from groundchat.grounding.adapters import AdapterSet
from groundchat.grounding.mocks import (
    BoxFillSegmenter,
    ExactSubstringMatcher,
    FailingAdapter,
    FixtureDetector,
)
from groundchat.grounding.overlay import png_to_bitmap
from groundchat.model import ModelConfig, WordTokenizer, build_toy_model
from groundchat.service import (
    CannedChatBackend,
    FailingChatBackend,
    ModelChatBackend,
    SessionStore,
    create_app,
)
from groundchat.training import corpus_texts, TrainingSample

IMAGE = demo_image()
AUDIO = demo_audio()
WHAT_IS = "What is the image?"
DESCRIBE_AUDIO = "Pay attention to the audio and describe what you notice."


def canned_app(**kwargs):
    backend = CannedChatBackend(canned_replies(IMAGE, AUDIO))
    return create_app(backend, demo_adapters(IMAGE), **kwargs)


@pytest.fixture()
def client():
    return TestClient(canned_app())


def new_session(client) -> str:
    response = client.post("/v1/sessions")
    assert response.status_code == 201
    return response.json()["id"]


def send(client, session_id, text, image=None, audio=None):
    files = {}
    if image is not None:
        files["image"] = ("image.png", image.payload, "image/png")
    if audio is not None:
        files["audio"] = ("audio.wav", audio.payload, "audio/wav")
    return client.post(
        f"/v1/sessions/{session_id}/messages", data={"text": text}, files=files
    )


class TestHealthAndSessions:
    def test_health(self, client):
        body = client.get("/v1/health").json()
        assert body["status"] == "ok"
        assert body["backend"] == "canned"
        assert body["grounding"] is True
        assert body["schema_version"] == 1

    def test_create_session_empty_and_unique(self, client):
        a = client.post("/v1/sessions").json()
        b = client.post("/v1/sessions").json()
        assert a["turns"] == []
        assert a["id"] != b["id"]

    def test_session_retrievable(self, client):
        sid = new_session(client)
        body = client.get(f"/v1/sessions/{sid}").json()
        assert body["id"] == sid
        assert body["turns"] == []
        assert "created" in body and "updated" in body

    def test_unknown_session_404(self, client):
        response = client.get("/v1/sessions/nope")
        assert response.status_code == 404
        assert response.json() == {
            "code": "not_found",
            "message": "no session nope",
            "stage": "session",
        }


class TestMessages:
    def test_image_message_reply_and_grounding(self, client):
        sid = new_session(client)
        response = send(client, sid, WHAT_IS, image=IMAGE)
        assert response.status_code == 200
        body = response.json()
        assert body["turn_index"] == 1
        reply = body["reply"]
        assert reply["text"] == DEMO_REPLY
        grounding = reply["grounding"]
        labels = [e["label"] for e in grounding["entities"]]
        assert labels == ["dog", "frisbee"]
        assert [m["surface"] for m in grounding["matches"]] == ["dog", "frisbee"]
        assert [e["mask_id"] for e in grounding["entities"]] == ["t1e0", "t1e1"]
        assert grounding["error"] is None
        # masks travel by id, never inline
        assert all("mask" not in e for e in grounding["entities"])

    def test_transcript_records_both_turns(self, client):
        sid = new_session(client)
        send(client, sid, WHAT_IS, image=IMAGE)
        turns = client.get(f"/v1/sessions/{sid}").json()["turns"]
        assert [t["role"] for t in turns] == ["human", "assistant"]
        assert turns[0]["text"] == WHAT_IS
        assert turns[0]["attachments"][0]["digest"] == IMAGE.digest
        assert turns[1]["text"] == DEMO_REPLY

    def test_mask_roundtrip(self, client):
        sid = new_session(client)
        body = send(client, sid, WHAT_IS, image=IMAGE).json()
        mask_id = body["reply"]["grounding"]["entities"][0]["mask_id"]
        response = client.get(f"/v1/sessions/{sid}/masks/{mask_id}")
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        width, height, bitmap = png_to_bitmap(response.content)
        assert (width, height) == (96, 64)  # mask dims equal source image dims
        assert sum(bitmap) == 32 * 32  # boxfill of the dog box

    def test_unknown_mask_404(self, client):
        sid = new_session(client)
        send(client, sid, WHAT_IS, image=IMAGE)
        response = client.get(f"/v1/sessions/{sid}/masks/zzz")
        assert response.status_code == 404
        assert response.json()["code"] == "not_found"

    def test_audio_only_has_no_grounding(self, client):
        sid = new_session(client)
        body = send(client, sid, DESCRIBE_AUDIO, audio=AUDIO).json()
        assert body["reply"]["text"] == "A steady alarm tone rings."
        assert body["reply"]["grounding"] is None
        assert body["reply"]["related_verdict"] is None

    def test_attachments_persist_across_turns(self, client):
        sid = new_session(client)
        send(client, sid, WHAT_IS, image=IMAGE)
        body = send(client, sid, WHAT_IS).json()  # no new upload
        assert body["turn_index"] == 3
        assert body["reply"]["text"] == DEMO_REPLY
        # grounding re-runs against the remembered image, under new mask ids
        assert body["reply"]["grounding"]["entities"][0]["mask_id"] == "t3e0"

    def test_negative_pair_verdict_unrelated(self, client):
        sid = new_session(client)
        body = send(client, sid, RELATED_QUESTION, image=IMAGE, audio=AUDIO).json()
        assert body["reply"]["text"] == NEGATIVE_REPLY
        assert body["reply"]["related_verdict"] == "unrelated"

    def test_affirmative_reply_verdict_related(self):
        table = {(IMAGE.digest, AUDIO.digest, "Related?"): "Yes. They belong together."}
        app = create_app(CannedChatBackend(table), demo_adapters(IMAGE))
        client = TestClient(app)
        sid = new_session(client)
        body = send(client, sid, "Related?", image=IMAGE, audio=AUDIO).json()
        assert body["reply"]["related_verdict"] == "related"

    def test_descriptive_reply_verdict_uncertain(self, client):
        sid = new_session(client)
        body = send(
            client, sid,
            "Please find the source that emits the given sound in this image.",
            image=IMAGE, audio=AUDIO,
        ).json()
        assert body["reply"]["related_verdict"] == "uncertain"


class TestErrors:
    def test_post_to_unknown_session(self, client):
        response = send(client, "missing", WHAT_IS, image=IMAGE)
        assert response.status_code == 404

    def test_empty_text_rejected(self, client):
        sid = new_session(client)
        response = send(client, sid, "   ", image=IMAGE)
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_request"

    def test_missing_text_field_uses_error_shape(self, client):
        sid = new_session(client)
        response = client.post(f"/v1/sessions/{sid}/messages", data={})
        assert response.status_code == 422
        assert set(response.json()) == {"code", "message", "stage"}

    def test_pure_text_rejected_without_optin(self, client):
        sid = new_session(client)
        response = send(client, sid, "hello there")
        assert response.status_code == 422
        assert "pure-text" in response.json()["message"]

    def test_pure_text_allowed_with_optin(self):
        app = create_app(
            CannedChatBackend({}, fallback="plain text reply"), allow_pure_text=True
        )
        client = TestClient(app)
        sid = new_session(client)
        body = send(client, sid, "hello there")
        assert body.status_code == 200
        assert body.json()["reply"]["text"] == "plain text reply"

    def test_oversized_upload_413(self):
        client = TestClient(canned_app(max_upload_bytes=64))
        sid = new_session(client)
        response = send(client, sid, WHAT_IS, image=IMAGE)
        assert response.status_code == 413
        body = response.json()
        assert body["code"] == "payload_too_large"
        assert body["stage"] == "upload"

    def test_unrecognized_bytes_422(self, client):
        sid = new_session(client)
        response = client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": WHAT_IS},
            files={"image": ("x.png", b"definitely not an image", "image/png")},
        )
        assert response.status_code == 422
        assert response.json()["code"] == "undecodable_media"

    def test_corrupt_png_body_422(self, client):
        sid = new_session(client)
        payload = b"\x89PNG\r\n\x1a\n" + b"garbage" * 4
        response = client.post(
            f"/v1/sessions/{sid}/messages",
            data={"text": WHAT_IS},
            files={"image": ("x.png", payload, "image/png")},
        )
        assert response.status_code == 422
        assert response.json()["code"] == "undecodable_media"

    def test_backend_down_503_and_no_partial_turn(self):
        app = create_app(FailingChatBackend(), demo_adapters(IMAGE))
        client = TestClient(app)
        sid = new_session(client)
        response = send(client, sid, WHAT_IS, image=IMAGE)
        assert response.status_code == 503
        body = response.json()
        assert body["code"] == "adapter_unavailable"
        assert body["stage"] == "generation"
        assert client.get(f"/v1/sessions/{sid}").json()["turns"] == []

    def test_grounding_down_still_replies(self):
        adapters = AdapterSet(
            tagger=FailingAdapter(),
            detector=FixtureDetector({}),
            segmenter=BoxFillSegmenter(),
            matcher=ExactSubstringMatcher(),
        )
        app = create_app(CannedChatBackend(canned_replies(IMAGE, AUDIO)), adapters)
        client = TestClient(app)
        sid = new_session(client)
        response = send(client, sid, WHAT_IS, image=IMAGE)
        assert response.status_code == 200
        reply = response.json()["reply"]
        assert reply["text"] == DEMO_REPLY
        assert reply["grounding"] is None
        assert "[tagging]" in reply["grounding_error"]

    def test_no_adapters_means_no_grounding(self):
        app = create_app(CannedChatBackend(canned_replies(IMAGE, AUDIO)))
        client = TestClient(app)
        sid = new_session(client)
        reply = send(client, sid, WHAT_IS, image=IMAGE).json()["reply"]
        assert reply["text"] == DEMO_REPLY
        assert reply["grounding"] is None
        assert reply["grounding_error"] is None


class TestReplayDeterminism:
    SCRIPT = (
        (WHAT_IS, "image", None),
        (DESCRIBE_AUDIO, None, "audio"),
        (RELATED_QUESTION, "image", "audio"),
        (WHAT_IS, None, None),
    )

    def run_script(self):
        client = TestClient(canned_app())
        sid = new_session(client)
        out = []
        for text, img, aud in self.SCRIPT:
            response = send(
                client, sid, text,
                image=IMAGE if img else None,
                audio=AUDIO if aud else None,
            )
            assert response.status_code == 200
            body = response.json()
            out.append({"turn_index": body["turn_index"], "reply": body["reply"]})
        return out

    def test_fresh_service_reproduces_replies(self):
        assert self.run_script() == self.run_script()


class TestPersistence:
    def test_store_save_load_roundtrip(self, tmp_path):
        store = SessionStore()
        app = create_app(
            CannedChatBackend(canned_replies(IMAGE, AUDIO)),
            demo_adapters(IMAGE),
            store=store,
        )
        client = TestClient(app)
        sid = new_session(client)
        send(client, sid, WHAT_IS, image=IMAGE)
        path = tmp_path / "sessions.json"
        store.save(path)

        restored = SessionStore()
        assert restored.load(path) == 1
        app2 = create_app(
            CannedChatBackend(canned_replies(IMAGE, AUDIO)),
            demo_adapters(IMAGE),
            store=restored,
        )
        client2 = TestClient(app2)
        assert client2.get(f"/v1/sessions/{sid}").json() == client.get(
            f"/v1/sessions/{sid}"
        ).json()
        mask = client2.get(f"/v1/sessions/{sid}/masks/t1e0")
        assert mask.status_code == 200
        # the restored session keeps its media scope: no re-upload needed
        body = send(client2, sid, WHAT_IS).json()
        assert body["reply"]["text"] == DEMO_REPLY


def toy_backend():
    samples = [
        TrainingSample(IMAGE, None, WHAT_IS, DEMO_REPLY),
        TrainingSample(None, AUDIO, DESCRIBE_AUDIO, "A steady alarm tone rings."),
    ]
    tokenizer = WordTokenizer.from_texts(corpus_texts(samples))
    config = ModelConfig(n_queries=2, d_q=16, d_enc=16, d_llm=32, n_layers=1, seed=1)
    return ModelChatBackend(build_toy_model(tokenizer, config))


class TestModelBackend:
    def test_untrained_model_replies_deterministically(self):
        app = create_app(toy_backend())
        client = TestClient(app)
        replies = []
        for _ in range(2):
            sid = new_session(client)
            body = send(client, sid, WHAT_IS, image=IMAGE)
            assert body.status_code == 200
            replies.append(body.json()["reply"]["text"])
        assert replies[0] == replies[1]

    def test_multiturn_history_encodes_cleanly(self):
        app = create_app(toy_backend())
        client = TestClient(app)
        sid = new_session(client)
        assert send(client, sid, WHAT_IS, image=IMAGE).status_code == 200
        second = send(client, sid, DESCRIBE_AUDIO, audio=AUDIO)
        assert second.status_code == 200
        assert isinstance(second.json()["reply"]["text"], str)

    @pytest.mark.slow
    def test_overfit_checkpoint_negative_pair_through_api(self):
        import torch

        from groundchat.training import OVERFIT_CONFIG, train

        torch.manual_seed(0)
        quad = overfit_quad()
        samples = [TrainingSample(*s) for s in quad]
        tokenizer = WordTokenizer.from_texts(corpus_texts(samples))
        model = build_toy_model(tokenizer, ModelConfig(seed=1))
        train(model, OVERFIT_CONFIG, samples)

        app = create_app(ModelChatBackend(model), demo_adapters(IMAGE))
        client = TestClient(app)
        sid = new_session(client)
        image, audio = quad[3][0], quad[3][1]
        body = send(client, sid, RELATED_QUESTION, image=image, audio=audio).json()
        assert body["reply"]["text"] == NEGATIVE_REPLY
        assert "The image" in body["reply"]["text"]
        assert "The audio" in body["reply"]["text"]
        assert body["reply"]["related_verdict"] == "unrelated"
