"""Client-facing service: sessions, dispatch, rating gate, persistence."""

from .models import (
    Disclaimer,
    Query,
    RatingRecord,
    ResponseDocument,
    Role,
    Session,
    AnswerText,
    PseudoCode,
    Annotated,
    RelevantFunctions,
    SuggestedFollowUps,
    DISCLAIMER_TEXT,
)
from .throttle import TokenBucket
from .store import RecordLog
from .engine import TutorEngine, EngineConfig
from .render import document_from_events, render_text

__all__ = [
    "Session",
    "Role",
    "Query",
    "ResponseDocument",
    "RatingRecord",
    "AnswerText",
    "PseudoCode",
    "Annotated",
    "RelevantFunctions",
    "SuggestedFollowUps",
    "Disclaimer",
    "DISCLAIMER_TEXT",
    "TokenBucket",
    "RecordLog",
    "TutorEngine",
    "EngineConfig",
    "document_from_events",
    "render_text",
]
