"""Incremental parse events.

One flat event type keeps wire serialization trivial: events cross the
process boundary as JSON objects named by ``kind``, and golden
transcripts compare them byte-for-byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

KIND_SECTION_START = "section_start"
KIND_TEXT_DELTA = "text_delta"
KIND_LINE_COMPLETED = "line_completed"
KIND_SECTION_END = "section_end"
KIND_PROGRESS = "progress_line_count"
KIND_WARNING = "parse_warning"


@dataclass(frozen=True)
class StreamEvent:
    kind: str
    section: str | None = None
    text: str | None = None
    visible: str | None = None
    explanation: str | None = None
    count: int | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in ("section", "text", "visible", "explanation", "count", "detail"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StreamEvent":
        return cls(**data)


def section_start(section: str) -> StreamEvent:
    return StreamEvent(KIND_SECTION_START, section=section)


def text_delta(section: str, fragment: str) -> StreamEvent:
    return StreamEvent(KIND_TEXT_DELTA, section=section, text=fragment)


def line_completed(section: str, visible: str, explanation: str | None = None) -> StreamEvent:
    return StreamEvent(KIND_LINE_COMPLETED, section=section, visible=visible,
                       explanation=explanation)


def section_end(section: str) -> StreamEvent:
    return StreamEvent(KIND_SECTION_END, section=section)


def progress_line_count(count: int) -> StreamEvent:
    return StreamEvent(KIND_PROGRESS, count=count)


def parse_warning(detail: str, section: str | None = None) -> StreamEvent:
    return StreamEvent(KIND_WARNING, detail=detail, section=section)


def coalesce_deltas(events: Iterable[StreamEvent]) -> list[StreamEvent]:
    """Merge consecutive text deltas of the same section.

    Delta granularity depends on chunk boundaries; every trace-equality
    check (chunking invariance, golden transcripts) compares coalesced
    traces, where the parse is deterministic.
    """
    out: list[StreamEvent] = []
    for ev in events:
        if (
            ev.kind == KIND_TEXT_DELTA
            and out
            and out[-1].kind == KIND_TEXT_DELTA
            and out[-1].section == ev.section
        ):
            out[-1] = text_delta(ev.section, out[-1].text + ev.text)
        else:
            out.append(ev)
    return out


class LineCountingTap:
    """Counts newlines in raw text and reports progress events.

    Used by orchestrators for chained calls whose raw output stays
    hidden: the client sees only how many lines have been generated.
    """

    def __init__(self, emit: Callable[[StreamEvent], None]):
        self._emit = emit
        self.lines = 0

    def push(self, fragment: str) -> None:
        added = fragment.count("\n")
        if added:
            self.lines += added
            self._emit(progress_line_count(self.lines))
