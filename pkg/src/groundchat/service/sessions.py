"""In-memory session store with optional file-backed persistence.

A session owns its transcript, the raw media uploaded to it, and the masks
its grounded turns produced.  Turns are appended only in human+assistant
pairs, so role alternation holds by construction and a failed generation
leaves no partial turn behind.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from ..types import ChatTurn, ModalityInput, Role, SegmentMask

SESSIONS_FORMAT_VERSION = 1


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


@dataclass
class Session:
    id: str
    created: float
    updated: float
    turns: list[ChatTurn] = field(default_factory=list)
    payloads: list[dict[str, Any]] = field(default_factory=list)  # wire form, 1:1 with turns
    attachments: dict[str, ModalityInput] = field(default_factory=dict)
    masks: dict[str, SegmentMask] = field(default_factory=dict)
    latest_image: str | None = None
    latest_audio: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def append_exchange(
        self,
        human: ChatTurn,
        human_payload: dict[str, Any],
        assistant: ChatTurn,
        assistant_payload: dict[str, Any],
    ) -> None:
        if self.turns and self.turns[-1].role is not Role.ASSISTANT:
            raise RuntimeError("session transcript out of order")
        if human.role is not Role.HUMAN or assistant.role is not Role.ASSISTANT:
            raise RuntimeError("exchange roles reversed")
        self.turns.extend([human, assistant])
        self.payloads.extend([human_payload, assistant_payload])
        self.updated = time.time()

    def snapshot(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "id": self.id,
            "created": _iso(self.created),
            "updated": _iso(self.updated),
            "turns": self.payloads,
            "attachments": [
                {"digest": digest, "kind": item.kind.value, "format": item.format.value}
                for digest, item in sorted(self.attachments.items())
            ],
        }


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self) -> Session:
        now = time.time()
        session = Session(id=uuid.uuid4().hex, created=now, updated=now)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)

    # -- persistence -----------------------------------------------------------

    def save(self, path: Path | str) -> None:
        with self._lock:
            sessions = list(self._sessions.values())
        payload = {
            "format_version": SESSIONS_FORMAT_VERSION,
            "sessions": [_session_dict(s) for s in sessions],
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    def load(self, path: Path | str) -> int:
        """Replace store contents from a save file; returns the session count."""
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
            if payload["format_version"] != SESSIONS_FORMAT_VERSION:
                raise ConfigError(
                    f"unsupported session file version {payload['format_version']}"
                )
            sessions = [_session_from_dict(d) for d in payload["sessions"]]
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load sessions from {path}: {exc}") from exc
        with self._lock:
            self._sessions = {s.id: s for s in sessions}
        return len(sessions)


def _session_dict(s: Session) -> dict[str, Any]:
    return {
        "id": s.id,
        "created": s.created,
        "updated": s.updated,
        "turns": [t.to_dict() for t in s.turns],
        "payloads": s.payloads,
        "attachments": {d: a.to_dict() for d, a in s.attachments.items()},
        "masks": {mid: m.to_dict() for mid, m in s.masks.items()},
        "latest_image": s.latest_image,
        "latest_audio": s.latest_audio,
    }


def _session_from_dict(d: dict[str, Any]) -> Session:
    return Session(
        id=d["id"],
        created=d["created"],
        updated=d["updated"],
        turns=[ChatTurn.from_dict(t) for t in d["turns"]],
        payloads=list(d["payloads"]),
        attachments={k: ModalityInput.from_dict(v) for k, v in d["attachments"].items()},
        masks={k: SegmentMask.from_dict(v) for k, v in d["masks"].items()},
        latest_image=d.get("latest_image"),
        latest_audio=d.get("latest_audio"),
    )
