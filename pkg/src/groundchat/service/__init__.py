"""HTTP chat service: session store, reply backends, FastAPI app."""

from .app import ApiError, SCHEMA_VERSION, create_app
from .backends import (
    CannedChatBackend,
    ChatBackend,
    FailingChatBackend,
    ModelChatBackend,
    TurnContext,
    backend_from_checkpoint,
)
from .sessions import Session, SessionStore

__all__ = [
    "ApiError",
    "CannedChatBackend",
    "ChatBackend",
    "FailingChatBackend",
    "ModelChatBackend",
    "SCHEMA_VERSION",
    "Session",
    "SessionStore",
    "TurnContext",
    "backend_from_checkpoint",
    "create_app",
]
