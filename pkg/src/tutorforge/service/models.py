"""Domain records: sessions, queries, responses, ratings.

Everything here serializes to plain dicts; the JSONL store and the
HTTP layer both use these shapes, and the public dataset format is the
same schema after pseudonymization.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field

from ..fixer import FixResponse
from ..prompts import FeatureKind, InlineKind
from ..scaffold import PseudoCodeLine
from .throttle import TokenBucket

DISCLAIMER_TEXT = (
    "Responses are generated by an AI language model; they can be "
    "confidently wrong. Verify anything important against course "
    "material or documentation."
)

FINISH_COMPLETE = "complete"
FINISH_TRUNCATED = "truncated"
FINISH_REFUSED = "refused"


class Role(str, enum.Enum):
    STUDENT = "student"
    ADMIN = "admin"


@dataclass
class Session:
    user_id: str
    role: Role
    token: str
    pending_rating: str | None = None
    throttle: TokenBucket | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


@dataclass(frozen=True)
class Query:
    id: str
    user_id: str
    feature: FeatureKind
    created_at: str
    question: str | None = None
    code: str | None = None
    intended_behavior: str | None = None
    parent_response: str | None = None
    inline_kind: InlineKind | None = None

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "user_id": self.user_id,
            "feature": self.feature.value,
            "created_at": self.created_at,
        }
        for key in ("question", "code", "intended_behavior", "parent_response"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.inline_kind is not None:
            out["inline_kind"] = self.inline_kind.value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Query":
        return cls(
            id=data["id"],
            user_id=data.get("user_id", ""),
            feature=FeatureKind(data["feature"]),
            created_at=data["created_at"],
            question=data.get("question"),
            code=data.get("code"),
            intended_behavior=data.get("intended_behavior"),
            parent_response=data.get("parent_response"),
            inline_kind=InlineKind(data["inline_kind"]) if "inline_kind" in data else None,
        )


# --- response segments ---

@dataclass(frozen=True)
class AnswerText:
    text: str
    kind: str = field(default="answer", init=False)

    def to_dict(self) -> dict:
        return {"type": "answer", "text": self.text}


@dataclass(frozen=True)
class PseudoCode:
    lines: tuple[PseudoCodeLine, ...]
    kind: str = field(default="pseudocode", init=False)

    def to_dict(self) -> dict:
        return {"type": "pseudocode", "lines": [l.to_dict() for l in self.lines]}


@dataclass(frozen=True)
class Annotated:
    fix: FixResponse
    kind: str = field(default="annotated", init=False)

    def to_dict(self) -> dict:
        return {"type": "annotated", "fix": self.fix.to_dict()}


@dataclass(frozen=True)
class RelevantFunctions:
    names: tuple[str, ...]
    kind: str = field(default="functions", init=False)

    def to_dict(self) -> dict:
        return {"type": "functions", "names": list(self.names)}


@dataclass(frozen=True)
class SuggestedFollowUps:
    questions: tuple[str, ...]
    kind: str = field(default="followups", init=False)

    def to_dict(self) -> dict:
        return {"type": "followups", "questions": list(self.questions)}


@dataclass(frozen=True)
class Disclaimer:
    text: str = DISCLAIMER_TEXT
    kind: str = field(default="disclaimer", init=False)

    def to_dict(self) -> dict:
        return {"type": "disclaimer", "text": self.text}


def segment_from_dict(data: dict):
    t = data["type"]
    if t == "answer":
        return AnswerText(data["text"])
    if t == "pseudocode":
        return PseudoCode(tuple(PseudoCodeLine.from_dict(l) for l in data["lines"]))
    if t == "annotated":
        return Annotated(FixResponse.from_dict(data["fix"]))
    if t == "functions":
        return RelevantFunctions(tuple(data["names"]))
    if t == "followups":
        return SuggestedFollowUps(tuple(data["questions"]))
    if t == "disclaimer":
        return Disclaimer(data.get("text", DISCLAIMER_TEXT))
    raise ValueError(f"unknown segment type {t!r}")


@dataclass(frozen=True)
class ResponseDocument:
    id: str
    query: Query
    segments: tuple
    finish: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        disclaimers = [s for s in self.segments if isinstance(s, Disclaimer)]
        if len(disclaimers) != 1:
            raise ValueError("a response carries exactly one disclaimer")
        if self.finish == FINISH_REFUSED:
            others = [s for s in self.segments
                      if not isinstance(s, (Disclaimer, AnswerText))]
            if others:
                raise ValueError("refused responses carry only the refusal text")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "query": self.query.to_dict(),
            "segments": [s.to_dict() for s in self.segments],
            "finish": self.finish,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ResponseDocument":
        return cls(
            id=data["id"],
            query=Query.from_dict(data["query"]),
            segments=tuple(segment_from_dict(s) for s in data["segments"]),
            finish=data["finish"],
            warnings=tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True)
class RatingRecord:
    response_id: str
    stars: int
    reason: str
    created_at: str

    def to_dict(self) -> dict:
        return {"response_id": self.response_id, "stars": self.stars,
                "reason": self.reason, "created_at": self.created_at}

    @classmethod
    def from_dict(cls, data: dict) -> "RatingRecord":
        return cls(data["response_id"], data["stars"], data.get("reason", ""),
                   data["created_at"])
