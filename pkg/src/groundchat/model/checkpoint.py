"""Versioned checkpoint container for the trainable heads.

Layout: a zip archive holding ``header.json`` (format version, model config,
vocabulary, component -> parameter names, metadata) and ``params.npz`` with
float64 arrays keyed ``component/param``.  Loading restores parameters into
an existing model and refuses shape or name mismatches.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from ..errors import ConfigError
from .stack import ModelConfig, MultimodalModel, build_toy_model
from .tokenizer import WordTokenizer

FORMAT_VERSION = 1

# Only these groups ever train, so only they are worth persisting; frozen
# groups are reconstructed from the config seed.
SAVED_GROUPS = (
    "vision_qformer",
    "vision_projection",
    "audio_qformer",
    "audio_projection",
)


def save_checkpoint(path: str | Path, model: MultimodalModel, meta: dict | None = None) -> None:
    groups = model.parameter_groups()
    components: dict[str, list[str]] = {}
    arrays: dict[str, np.ndarray] = {}
    for name in SAVED_GROUPS:
        module = groups[name]
        param_names = []
        for pname, param in sorted(module.named_parameters()):
            param_names.append(pname)
            arrays[f"{name}/{pname}"] = param.detach().numpy()
        components[name] = param_names
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "vocab": list(model.llm.tokenizer.vocab),
        "components": components,
        "meta": meta or {},
    }
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr("header.json", json.dumps(header, indent=2, sort_keys=True))
        zf.writestr("params.npz", buf.getvalue())


def read_header(path: str | Path) -> dict:
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("header.json"))
    except (OSError, zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"unreadable checkpoint {path}: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise ConfigError(
            f"checkpoint format {header.get('format_version')!r} unsupported, "
            f"expected {FORMAT_VERSION}"
        )
    return header


def load_checkpoint(path: str | Path) -> MultimodalModel:
    """Rebuild the full model: frozen parts from config seed, heads from disk."""
    header = read_header(path)
    config = ModelConfig.from_dict(header["config"])
    tokenizer = WordTokenizer(header["vocab"])
    model = build_toy_model(tokenizer, config)
    with zipfile.ZipFile(path) as zf:
        with np.load(io.BytesIO(zf.read("params.npz"))) as loaded:
            arrays = {k: loaded[k] for k in loaded.files}
    groups = model.parameter_groups()
    for name, param_names in header["components"].items():
        if name not in groups:
            raise ConfigError(f"checkpoint component {name!r} unknown")
        params = dict(groups[name].named_parameters())
        if sorted(params) != sorted(param_names):
            raise ConfigError(
                f"checkpoint component {name!r} parameters {sorted(param_names)} "
                f"do not match model {sorted(params)}"
            )
        for pname in param_names:
            arr = arrays[f"{name}/{pname}"]
            target = params[pname]
            if tuple(arr.shape) != tuple(target.shape):
                raise ConfigError(
                    f"{name}/{pname}: checkpoint shape {arr.shape} != model {tuple(target.shape)}"
                )
            with torch.no_grad():
                target.copy_(torch.from_numpy(arr))
    return model
