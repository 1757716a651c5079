"""Exception taxonomy shared across modules.

The service maps these onto HTTP codes (InputError -> 422, AdapterError ->
503) and the CLI onto exit codes (ConfigError/InputError -> 2, others -> 1).
"""

from __future__ import annotations


class GroundChatError(Exception):
    pass


class InputError(GroundChatError):
    """Undecodable or structurally invalid caller input."""


class ConfigError(GroundChatError):
    """Invalid configuration (unknown keys, bad values, missing files)."""


class PromptError(GroundChatError):
    """Prompt construction precondition violated or training string malformed."""


class AdapterError(GroundChatError):
    """A model adapter failed; carries the pipeline stage for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
