"""Markup grammar and incremental parser for streamed assistant output."""

from .events import (
    StreamEvent,
    line_completed,
    parse_warning,
    progress_line_count,
    section_end,
    section_start,
    text_delta,
    coalesce_deltas,
    LineCountingTap,
)
from .grammar import MarkupGrammar, default_grammar, UNSTRUCTURED_SECTION
from .parser import StreamParser, parse_document
from .keywords import KeywordSpan, extract_keywords

__all__ = [
    "StreamEvent",
    "section_start",
    "text_delta",
    "line_completed",
    "section_end",
    "progress_line_count",
    "parse_warning",
    "coalesce_deltas",
    "LineCountingTap",
    "MarkupGrammar",
    "default_grammar",
    "UNSTRUCTURED_SECTION",
    "StreamParser",
    "parse_document",
    "KeywordSpan",
    "extract_keywords",
]
