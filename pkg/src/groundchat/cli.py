"""Command line entry points: ground, train, dataset, serve.

One multiplexed `groundchat` binary.  Exit codes: 0 success, 1 runtime
failure, 2 usage or bad input/config.  Every subcommand accepts --seed and
is reproducible under it with the mock adapters.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import re
import signal
import socket
import sys
from pathlib import Path
from typing import Any, Sequence

import torch
import uvicorn

from .config import CliConfig, _TYPES as _CONFIG_FIELD_TYPES, resolve_config
from .data import (
    CaptionBundle,
    CaptionedMedia,
    CORPUS_CONSTANTS,
    DatasetKind,
    as_media_ref,
    build_clotho_detail,
    build_negative_pairs,
    build_vggss_instructions,
    description_samples,
    load_dataset,
    measure_description_file,
    measure_record_count,
    validate_manifest,
    write_dataset,
)
from .errors import AdapterError, ConfigError, InputError
from .fixtures import canned_replies, demo_adapters, demo_audio, demo_image, overfit_quad
from .grounding.overlay import render_overlay
from .grounding.pipeline import run_pipeline
from .media import modality_input_from_upload
from .model import (
    ModelConfig,
    WordTokenizer,
    build_toy_model,
    load_checkpoint,
    save_checkpoint,
)
from .service import CannedChatBackend, SessionStore, backend_from_checkpoint, create_app
from .training import Stage, TrainConfig, TrainingSample, corpus_texts, train
from .types import MediaRef, Modality

log = logging.getLogger(__name__)

_STAGES = {
    "stage1-vision": Stage.STAGE1_VISION,
    "stage1-audio": Stage.STAGE1_AUDIO,
    "stage2": Stage.STAGE2,
}

# dataset names whose record counts the published corpora pin down
KNOWN_COUNTS: dict[str, int] = {
    "clotho_detail": CORPUS_CONSTANTS["clotho_detail_items"],
    "vggss": CORPUS_CONSTANTS["vggss_instructions"],
    "minigpt4": CORPUS_CONSTANTS["minigpt4_instructions"],
}


def build_adapters(name: str, image=None):
    """Adapter registry: a named entry to an AdapterSet (or None)."""
    if name == "none":
        return None
    if name == "demo":
        return demo_adapters(image)
    raise ConfigError(f"unknown adapter registry entry {name!r}; known: demo, none")


# ---------------------------------------------------------------- file IO


def _read_file_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _read_ldjson(path: str | Path) -> list[dict]:
    try:
        text = _read_file_bytes(path).decode()
    except UnicodeDecodeError as exc:
        raise InputError(f"{path} is not text: {exc}") from exc
    records: list[dict] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            value = json.loads(line)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad JSON: {exc}") from exc
        if not isinstance(value, dict):
            raise InputError(f"{path}:{lineno}: expected an object")
        records.append(value)
    if not records:
        raise InputError(f"{path} holds no records")
    return records


def _ref_field(record: dict, key: str, kind: Modality, index: int) -> MediaRef:
    value = record.get(key)
    if isinstance(value, dict):
        try:
            return MediaRef.from_dict(value)
        except (KeyError, ValueError) as exc:
            raise InputError(f"record {index}: bad {key} reference: {exc}") from exc
    if isinstance(value, str):
        return as_media_ref(value, kind)
    raise InputError(f"record {index}: {key} must be a path or a reference object")


# ---------------------------------------------------------------- ground


def cmd_ground(args: argparse.Namespace, cfg: CliConfig) -> int:
    image = modality_input_from_upload(_read_file_bytes(args.image), Modality.IMAGE)
    adapters = build_adapters(cfg.adapters, image)
    if adapters is None:
        raise ConfigError("grounding needs an adapter set; pick one with --adapters")
    result = run_pipeline(image, args.text, adapters, cfg.grounding())

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(result.canonical_json() + "\n")
    (out / "overlay.png").write_bytes(render_overlay(image, result.entities))
    print(
        f"tags={len(result.tags)} entities={len(result.entities)} "
        f"matches={len(result.matches)}"
    )
    if result.error:
        print(f"note: {result.error}")
    print(f"wrote {out / 'result.json'} and {out / 'overlay.png'}")
    return 0


# ----------------------------------------------------------------- train


def _stage_data(stage: Stage, samples: Sequence[TrainingSample]):
    """Stage-appropriate view of the corpus.

    Stage 1 consumes single-modality (medium, caption) pairs; stage 2 takes
    full instruction samples.
    """
    if stage is Stage.STAGE1_VISION:
        return [(s.image, s.response) for s in samples
                if s.image is not None and s.audio is None]
    if stage is Stage.STAGE1_AUDIO:
        return [(s.audio, s.response) for s in samples
                if s.audio is not None and s.image is None]
    return list(samples)


def cmd_train(args: argparse.Namespace, cfg: CliConfig) -> int:
    stage = _STAGES[args.stage]
    samples = [TrainingSample(*item) for item in overfit_quad()]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.init is not None:
        model = load_checkpoint(args.init)
    else:
        if stage is Stage.STAGE2:
            log.warning("stage2 without a stage1 checkpoint: starting from random init")
        tokenizer = WordTokenizer.from_texts(corpus_texts(samples))
        model = build_toy_model(tokenizer, ModelConfig(seed=cfg.seed))

    config = TrainConfig(
        stage=stage,
        steps=args.steps,
        learning_rate=args.lr,
        warmup_steps=min(10, args.steps),
        decay_steps=args.decay_steps,
        seed=cfg.seed,
    )
    result = train(model, config, _stage_data(stage, samples),
                   log_path=out / "train_log.ldjson")
    save_checkpoint(out / "model.ckpt", model,
                    meta={"stage": stage.value, "steps": config.steps})
    print(f"final loss {result.final_loss:.4f} after {len(result.losses)} steps")
    print(f"wrote {out / 'model.ckpt'} and {out / 'train_log.ldjson'}")
    return 0


# --------------------------------------------------------------- dataset


class CaptionStitcher:
    """Offline stand-in for the assembly text model.

    Pulls the quoted captions back out of the prompt and merges them into
    one paragraph, dropping exact repeats.  A real text LLM drops in via
    the same complete() surface.
    """

    name = "stitch"

    def complete(self, prompt: str) -> str:
        lines = [l for l in prompt.splitlines() if l.startswith("Captions: ")]
        if not lines:
            raise InputError("assembly prompt carries no captions line")
        seen: set[str] = set()
        sentences: list[str] = []
        for caption in re.findall(r'"([^"]+)"', lines[-1]):
            sentence = caption.strip().rstrip(".!?") + "."
            if sentence.lower() in seen:
                continue
            seen.add(sentence.lower())
            sentences.append(sentence[0].upper() + sentence[1:])
        return " ".join(sentences)


def cmd_dataset_build_clotho(args: argparse.Namespace, cfg: CliConfig) -> int:
    bundles = []
    for i, record in enumerate(_read_ldjson(args.input)):
        audio = _ref_field(record, "audio", Modality.AUDIO, i)
        captions = record.get("captions")
        if not isinstance(captions, list) or not all(isinstance(c, str) for c in captions):
            raise InputError(f"record {i}: captions must be a list of strings")
        try:
            bundles.append(CaptionBundle(audio, tuple(captions)))
        except ValueError as exc:
            raise InputError(f"record {i}: {exc}") from exc

    records = build_clotho_detail(bundles, CaptionStitcher())
    flagged = sum(1 for r in records if r.flagged)
    samples = description_samples(records)
    manifest = write_dataset(args.out, args.name, DatasetKind.AUDIO_TEXT, samples,
                             sources=(Path(args.input).name,))
    print(f"built {manifest.count} descriptions ({flagged} flagged and skipped)")
    print(f"wrote {Path(args.out) / (args.name + '.ldjson')}")
    return 0


def cmd_dataset_build_vggss(args: argparse.Namespace, cfg: CliConfig) -> int:
    pairs = []
    for i, record in enumerate(_read_ldjson(args.input)):
        label = record.get("label")
        if not isinstance(label, str):
            raise InputError(f"record {i}: label must be a string")
        pairs.append((
            _ref_field(record, "audio", Modality.AUDIO, i),
            _ref_field(record, "image", Modality.IMAGE, i),
            label,
        ))
    samples = build_vggss_instructions(pairs, seed=cfg.seed)
    manifest = write_dataset(args.out, args.name, DatasetKind.AUDIO_IMAGE_TEXT,
                             samples, sources=(Path(args.input).name,))
    print(f"built {manifest.count} localization samples")
    print(f"wrote {Path(args.out) / (args.name + '.ldjson')}")
    return 0


def _captioned_pool(path: str | Path, kind: Modality) -> list[CaptionedMedia]:
    pool = []
    for i, record in enumerate(_read_ldjson(path)):
        caption = record.get("caption")
        if not isinstance(caption, str):
            raise InputError(f"record {i}: caption must be a string")
        source_id = record.get("source_id")
        if source_id is not None and not isinstance(source_id, str):
            raise InputError(f"record {i}: source_id must be a string")
        try:
            pool.append(CaptionedMedia(_ref_field(record, "ref", kind, i),
                                       caption, source_id))
        except ValueError as exc:
            raise InputError(f"record {i}: {exc}") from exc
    return pool


def cmd_dataset_build_negatives(args: argparse.Namespace, cfg: CliConfig) -> int:
    audio_pool = _captioned_pool(args.audio_captions, Modality.AUDIO)
    image_pool = _captioned_pool(args.image_captions, Modality.IMAGE)
    samples = build_negative_pairs(audio_pool, image_pool, args.count, cfg.seed)
    manifest = write_dataset(args.out, args.name, DatasetKind.AUDIO_IMAGE_TEXT,
                             samples, sources=(Path(args.audio_captions).name,
                                               Path(args.image_captions).name))
    print(f"built {manifest.count} negative pairs")
    print(f"wrote {Path(args.out) / (args.name + '.ldjson')}")
    return 0


def cmd_dataset_validate(args: argparse.Namespace, cfg: CliConfig) -> int:
    if bool(args.raw) == bool(args.dir):
        raise ConfigError("pick one of --raw FILE... or --dir DIR --name NAME")

    if args.raw:
        all_ok = True
        for path in args.raw:
            count = measure_record_count(path)
            line = f"{path}: records={count}"
            try:
                _, mean_words = measure_description_file(path)
                line += f" mean_words={mean_words:.2f}"
            except InputError:
                pass
            name = Path(path).stem.lower().replace("-", "_")
            expected = KNOWN_COUNTS.get(name)
            if expected is not None:
                ok = count == expected
                all_ok = all_ok and ok
                line += f" expected={expected} {'[ok]' if ok else '[MISMATCH]'}"
            print(line)
        return 0 if all_ok else 1

    if args.name is None:
        raise ConfigError("--dir needs --name")
    manifest, samples = load_dataset(args.dir, args.name)
    entries = validate_manifest(manifest, KNOWN_COUNTS, samples)
    for entry in entries:
        print(entry)
    return 0 if all(entry.ok for entry in entries) else 1


def cmd_dataset(args: argparse.Namespace, cfg: CliConfig) -> int:
    handlers = {
        "build-clotho-detail": cmd_dataset_build_clotho,
        "build-vggss": cmd_dataset_build_vggss,
        "build-negatives": cmd_dataset_build_negatives,
        "validate": cmd_dataset_validate,
    }
    return handlers[args.action](args, cfg)


# ----------------------------------------------------------------- serve


def cmd_serve(args: argparse.Namespace, cfg: CliConfig) -> int:
    if cfg.checkpoint is not None:
        backend = backend_from_checkpoint(cfg.checkpoint)
    else:
        log.warning("no checkpoint configured: serving the canned demo backend")
        backend = CannedChatBackend(canned_replies(demo_image(), demo_audio()))

    store = SessionStore()
    if cfg.sessions_path and Path(cfg.sessions_path).exists():
        print(f"restored {store.load(cfg.sessions_path)} sessions "
              f"from {cfg.sessions_path}")

    app = create_app(
        backend,
        build_adapters(cfg.adapters),
        grounding_config=cfg.grounding(),
        max_upload_bytes=cfg.max_upload_bytes,
        allow_pure_text=cfg.allow_pure_text,
        ui_dir=args.ui,
        store=store,
    )

    # fail fast with a clear message instead of uvicorn's logged traceback;
    # SO_REUSEADDR mirrors uvicorn's bind so TIME_WAIT leftovers don't fail it
    probe = socket.socket()
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((cfg.host, cfg.port))
    except OSError as exc:
        print(f"cannot bind {cfg.host}:{cfg.port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()

    server = uvicorn.Server(
        uvicorn.Config(app, host=cfg.host, port=cfg.port, log_level="warning")
    )
    # uvicorn replays the termination signal once its shutdown finishes; park
    # no-op handlers for it to replay into, or the flush below never runs
    try:
        signal.signal(signal.SIGTERM, lambda *_: None)
        signal.signal(signal.SIGINT, lambda *_: None)
        parked = True
    except ValueError:  # outside the main thread signals are not ours to take
        parked = False
    try:
        server.run()
    finally:
        if parked:
            signal.signal(signal.SIGTERM, signal.SIG_DFL)
            signal.signal(signal.SIGINT, signal.SIG_DFL)
    if cfg.sessions_path:
        store.save(cfg.sessions_path)
        print(f"saved {len(store)} sessions to {cfg.sessions_path}")
    return 0


# ------------------------------------------------------------ entry point


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _positive_float(raw: str) -> float:
    value = float(raw)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundchat",
        description="Grounded multimodal chat: pipeline, training, datasets, service.",
    )
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="YAML config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (overrides config)")

    ground = sub.add_parser("ground", help="run the grounding pipeline on one image")
    ground.add_argument("image", help="image file to ground")
    ground.add_argument("--text", default=None,
                        help="reply text to match entities against; omit for tags+entities only")
    ground.add_argument("--out", default="ground_out", help="output directory")
    ground.add_argument("--adapters", default=None, help="adapter registry entry")
    ground.add_argument("--tag-threshold", dest="tag_score_threshold", type=float,
                        default=None, help="tag score cutoff")
    ground.add_argument("--box-threshold", dest="box_score_threshold", type=float,
                        default=None, help="detection score cutoff")
    add_seed(ground)
    ground.set_defaults(func=cmd_ground)

    tr = sub.add_parser("train", help="train modality stacks on the fixture corpus")
    tr.add_argument("--stage", required=True, choices=sorted(_STAGES))
    tr.add_argument("--steps", type=_positive_int, default=50)
    tr.add_argument("--lr", type=_positive_float, default=0.2)
    tr.add_argument("--decay-steps", type=int, default=0,
                    help="cosine decay horizon, 0 disables")
    tr.add_argument("--init", default=None, metavar="CKPT",
                    help="checkpoint to continue from")
    tr.add_argument("--out", default="train_out", help="output directory")
    add_seed(tr)
    tr.set_defaults(func=cmd_train)

    ds = sub.add_parser("dataset", help="build or validate instruction datasets")
    ds_sub = ds.add_subparsers(dest="action", required=True)

    clotho = ds_sub.add_parser("build-clotho-detail",
                               help="assemble long audio descriptions from caption bundles")
    clotho.add_argument("--input", required=True,
                        help="LDJSON of {audio, captions[5]} records")
    clotho.add_argument("--out", required=True, help="dataset directory")
    clotho.add_argument("--name", default="clotho_detail")
    add_seed(clotho)
    clotho.set_defaults(func=cmd_dataset)

    vggss = ds_sub.add_parser("build-vggss",
                              help="wrap sound-source labels into grounding samples")
    vggss.add_argument("--input", required=True,
                       help="LDJSON of {image, audio, label} records")
    vggss.add_argument("--out", required=True, help="dataset directory")
    vggss.add_argument("--name", default="vggss")
    add_seed(vggss)
    vggss.set_defaults(func=cmd_dataset)

    neg = ds_sub.add_parser("build-negatives",
                            help="sample mismatched audio/image pairs")
    neg.add_argument("--audio-captions", required=True,
                     help="LDJSON of {ref, caption, source_id?} audio records")
    neg.add_argument("--image-captions", required=True,
                     help="LDJSON of {ref, caption, source_id?} image records")
    neg.add_argument("--count", type=_positive_int, required=True)
    neg.add_argument("--out", required=True, help="dataset directory")
    neg.add_argument("--name", default="negatives")
    add_seed(neg)
    neg.set_defaults(func=cmd_dataset)

    val = ds_sub.add_parser("validate",
                            help="check datasets against their manifests and known corpus sizes")
    val.add_argument("--dir", default=None, help="dataset directory")
    val.add_argument("--name", default=None, help="dataset name inside --dir")
    val.add_argument("--raw", nargs="+", default=None, metavar="FILE",
                     help="measure raw caption/record files instead")
    add_seed(val)
    val.set_defaults(func=cmd_dataset)

    serve = sub.add_parser("serve", help="run the chat service")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--checkpoint", default=None,
                       help="model checkpoint to serve (default: canned demo backend)")
    serve.add_argument("--adapters", default=None, help="adapter registry entry")
    serve.add_argument("--sessions", dest="sessions_path", default=None,
                       help="JSON file for session persistence across restarts")
    serve.add_argument("--allow-pure-text", action=argparse.BooleanOptionalAction,
                       default=None, help="accept messages with no attachments")
    serve.add_argument("--ui", default=None, metavar="DIR",
                       help="static web client directory to mount at /ui")
    add_seed(serve)
    serve.set_defaults(func=cmd_serve)

    return parser


def _flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        name: value
        for name, value in vars(args).items()
        if name in _CONFIG_FIELD_TYPES and value is not None
    }


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return exc.code if isinstance(exc.code, int) else 2

    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args.config, None, _flag_overrides(args))
        random.seed(cfg.seed)
        torch.manual_seed(cfg.seed)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)  # message carries its [stage] tag
        return 1
    except Exception as exc:  # last resort: report, don't trace
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
