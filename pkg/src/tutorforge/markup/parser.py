"""Incremental parser for the streamed markup.

The grammar is line-oriented, which is what makes incremental parsing
safe: every structural decision (is this line a marker? where does the
explanation start?) depends only on the bytes of that line, never on
how the stream was chunked. Content of single-line sections and of
unstructured regions is emitted eagerly as text deltas; block-section
lines are held until their newline because a completed line is the unit
the UI renders.

Chunking invariance is stated over traces with consecutive text deltas
of the same section coalesced (see ``coalesce_deltas``); delta
granularity is the only thing chunk boundaries may influence.

Byte accounting, for the reconstruction property: marker lines, block
begin/end lines, the ``///`` separator with adjacent spaces/tabs, one
optional space after a single-line marker, and the line terminators of
structured lines are structure; everything else is content and is
emitted exactly once (unstructured regions keep their newlines).
"""

from __future__ import annotations

from .events import (
    StreamEvent,
    line_completed,
    parse_warning,
    section_end,
    section_start,
    text_delta,
)
from .grammar import (
    MARKER_BEGIN,
    MARKER_END,
    MARKER_SINGLE,
    MarkupGrammar,
    UNSTRUCTURED_SECTION,
)
from ..errors import ParserFinalized

_START = "start"
_SINGLE_FIRST = "single_first"
_SINGLE_CONTENT = "single_content"
_UNSTRUCT = "unstruct"
_BLOCK_LINE = "block_line"


class StreamParser:
    """Single-owner incremental parser; one instance per response stream."""

    def __init__(self, grammar: MarkupGrammar, expected_sections: list[str] | None = None):
        self.grammar = grammar
        self.expected = tuple(expected_sections or ())
        self._pending = ""
        self._state = _START
        self._section: str | None = None   # open single-line section
        self._block: str | None = None     # open block section
        self._unstruct_open = False
        self._finalized = False

    # -- public API --

    def feed(self, chunk: str) -> list[StreamEvent]:
        if self._finalized:
            raise ParserFinalized("feed() after finalize()")
        events: list[StreamEvent] = []
        self._pending += chunk
        self._process(events, at_eof=False)
        return events

    def finalize(self) -> list[StreamEvent]:
        if self._finalized:
            return []
        events: list[StreamEvent] = []
        self._process(events, at_eof=True)
        if self._state in (_SINGLE_FIRST, _SINGLE_CONTENT):
            events.append(section_end(self._section))
            self._section = None
        if self._unstruct_open:
            events.append(section_end(UNSTRUCTURED_SECTION))
            self._unstruct_open = False
        if self._block is not None:
            events.append(parse_warning(f"unterminated section '{self._block}'", self._block))
            events.append(section_end(self._block))
            self._block = None
        self._finalized = True
        return events

    # -- state machine --

    def _process(self, events: list[StreamEvent], at_eof: bool) -> None:
        while True:
            p = self._pending
            if self._state == _START:
                if not p:
                    return
                decision = self._classify_line_start(p, at_eof)
                if decision is None:
                    return
                if not self._apply_start_decision(decision, events, at_eof):
                    return
            elif self._state == _SINGLE_FIRST:
                if not p:
                    return
                if p[0] == " ":
                    self._pending = p[1:]
                self._state = _SINGLE_CONTENT
            elif self._state == _SINGLE_CONTENT:
                nl = p.find("\n")
                if nl == -1:
                    if p:
                        events.append(text_delta(self._section, p))
                        self._pending = ""
                    return
                if nl > 0:
                    events.append(text_delta(self._section, p[:nl]))
                events.append(section_end(self._section))
                self._section = None
                self._pending = p[nl + 1:]
                self._state = _START
            elif self._state == _UNSTRUCT:
                nl = p.find("\n")
                if nl == -1:
                    if p:
                        events.append(text_delta(UNSTRUCTURED_SECTION, p))
                        self._pending = ""
                    return
                events.append(text_delta(UNSTRUCTURED_SECTION, p[: nl + 1]))
                self._pending = p[nl + 1:]
                self._state = _START
            elif self._state == _BLOCK_LINE:
                nl = p.find("\n")
                if nl == -1:
                    if not at_eof:
                        return
                    if not p:
                        return
                    line, consumed = p, len(p)
                else:
                    line, consumed = p[:nl], nl + 1
                if not self._apply_block_line(line, consumed, events):
                    # drift: reclassify the same line from the start state
                    continue

    def _classify_line_start(self, p: str, at_eof: bool):
        """Decide what the current line is, or ``None`` to wait for bytes.

        Returns one of::

            ("single", marker, section)
            ("token", marker_kind, section, consumed_bytes)
            ("plain", line, consumed, line_is_complete)
            ("plain_end_token", line, consumed)   # stray end marker
        """
        nl = p.find("\n")
        line = p if nl == -1 else p[:nl]
        complete = (nl != -1) or at_eof
        consumed = len(line) + (1 if nl != -1 else 0)
        for marker, mkind, sec in self.grammar.markers:
            if line.startswith(marker):
                if mkind == MARKER_SINGLE:
                    return ("single", marker, sec)
                tail = line[len(marker):]
                if tail.strip(" \t") == "":
                    if not complete:
                        return None
                    if mkind == MARKER_BEGIN:
                        return ("token", mkind, sec, consumed)
                    return ("plain_end_token", line, consumed)
                if mkind == MARKER_END and complete:
                    # e.g. "// [code-end] junk": plain content either way
                    return ("plain", line, consumed, complete)
                if mkind == MARKER_BEGIN:
                    return ("plain", line, consumed, complete)
                # end-token prefix with trailing junk, line not complete:
                # decided as plain, stream it
                return ("plain", line, consumed, complete)
        if not complete:
            for marker, _, _ in self.grammar.markers:
                if marker.startswith(line):
                    return None
        return ("plain", line, consumed, complete)

    def _apply_start_decision(self, decision, events: list[StreamEvent], at_eof: bool) -> bool:
        kind = decision[0]
        if kind == "single":
            _, marker, sec = decision
            self._close_unstructured(events)
            self._warn_unexpected(sec, events)
            events.append(section_start(sec))
            self._pending = self._pending[len(marker):]
            self._section = sec
            self._state = _SINGLE_FIRST
            return True
        if kind == "token":
            _, _, sec, consumed = decision
            self._close_unstructured(events)
            self._warn_unexpected(sec, events)
            events.append(section_start(sec))
            self._pending = self._pending[consumed:]
            self._block = sec
            self._state = _BLOCK_LINE
            return True
        if kind == "plain_end_token":
            _, line, consumed = decision
            events.append(parse_warning(f"unexpected end marker {line.strip()!r}"))
            self._open_unstructured(events)
            fragment = self._pending[:consumed]
            events.append(text_delta(UNSTRUCTURED_SECTION, fragment))
            self._pending = self._pending[consumed:]
            return True
        # plain content: enter unstructured streaming for this line
        self._open_unstructured(events)
        self._state = _UNSTRUCT
        return True

    def _apply_block_line(self, line: str, consumed: int, events: list[StreamEvent]) -> bool:
        """Handle a complete line inside a block; False means drift reprocess."""
        sec = self._block
        stripped = line.rstrip(" \t")
        if stripped == self.grammar.end_token(sec):
            events.append(section_end(sec))
            self._block = None
            self._pending = self._pending[consumed:]
            self._state = _START
            return True
        if self._is_marker_line(line, stripped):
            events.append(parse_warning(f"unterminated section '{sec}'", sec))
            events.append(section_end(sec))
            self._block = None
            self._state = _START
            return False
        sep = self.grammar.line_explanation_separator
        idx = line.find(sep)
        if idx == -1:
            events.append(line_completed(sec, line, None))
        else:
            visible = line[:idx].rstrip(" \t")
            explanation = line[idx + len(sep):].lstrip(" \t")
            events.append(line_completed(sec, visible, explanation))
        self._pending = self._pending[consumed:]
        return True

    def _is_marker_line(self, line: str, stripped: str) -> bool:
        for marker, mkind, _ in self.grammar.markers:
            if mkind == MARKER_SINGLE:
                if line.startswith(marker):
                    return True
            elif stripped == marker:
                return True
        return False

    def _open_unstructured(self, events: list[StreamEvent]) -> None:
        if not self._unstruct_open:
            events.append(parse_warning("unstructured content outside any section"))
            events.append(section_start(UNSTRUCTURED_SECTION))
            self._unstruct_open = True

    def _close_unstructured(self, events: list[StreamEvent]) -> None:
        if self._unstruct_open:
            events.append(section_end(UNSTRUCTURED_SECTION))
            self._unstruct_open = False

    def _warn_unexpected(self, sec: str, events: list[StreamEvent]) -> None:
        if self.expected and sec not in self.expected:
            events.append(parse_warning(f"unexpected section '{sec}'", sec))


def parse_document(
    grammar: MarkupGrammar,
    text: str,
    expected_sections: list[str] | None = None,
) -> list[StreamEvent]:
    """Parse a complete document in one pass (the batch oracle)."""
    parser = StreamParser(grammar, expected_sections)
    events = parser.feed(text)
    events.extend(parser.finalize())
    return events
