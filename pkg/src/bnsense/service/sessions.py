"""In-memory session state for the HTTP service.

A session owns one document, its undo history (bounded), a compiled
inference context (the network structure never changes within a session,
so one compilation serves every revision), and any fit jobs. All mutations
on a session are serialized by its lock; reads take the lock briefly to
snapshot the current document and then compute without it.
"""

from __future__ import annotations

import threading
import uuid
from collections import deque
from dataclasses import dataclass, field
from typing import Any

from .. import formats, inference, model
from ..errors import UnknownEntityError
from ..formats import Document
from ..inference import InferenceContext


@dataclass
class FitJob:
    id: str
    base_revision: int
    status: str = "running"  # running | done | failed
    result: dict | None = None
    error: str | None = None
    applied: bool = False


class Session:
    def __init__(self, session_id: str, doc: Document, history_cap: int):
        self.id = session_id
        self.doc = doc
        self.revision = 0
        self.history: deque[str] = deque(maxlen=history_cap)
        self.ctx: InferenceContext = inference.compile(doc.network)
        self.lock = threading.Lock()
        self.fit_jobs: dict[str, FitJob] = {}

    def snapshot(self) -> tuple[Document, int]:
        with self.lock:
            return self.doc, self.revision

    def mutate(self, new_doc: Document, expected_revision: int | None = None) -> int | None:
        """Replace the document behind an undo point; returns the new
        revision, or None when expected_revision no longer matches."""
        with self.lock:
            if expected_revision is not None and self.revision != expected_revision:
                return None
            self.history.append(formats.serialize_document(self.doc))
            self.doc = new_doc
            self.revision += 1
            return self.revision

    def undo(self) -> int | None:
        with self.lock:
            if not self.history:
                return None
            text = self.history.pop()
            self.doc = formats.parse_document(text)
            self.revision += 1
            return self.revision


class SessionStore:
    def __init__(self, history_cap: int = 100):
        self.history_cap = history_cap
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, doc: Document) -> Session:
        session = Session(uuid.uuid4().hex, doc, self.history_cap)
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)
