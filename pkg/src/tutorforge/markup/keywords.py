"""Backtick-delimited keyword extraction from prose."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class KeywordSpan:
    start: int   # offset of the opening delimiter
    end: int     # offset one past the closing delimiter
    keyword: str


def extract_keywords(text: str, delimiter: str = "`") -> list[KeywordSpan]:
    """Find keyword spans, left to right, non-overlapping.

    A span covers both delimiters; ``keyword`` is the text between them.
    Pairs never cross lines, an unpaired delimiter leaves the rest of
    the line as plain text, and empty pairs are skipped.
    """
    spans: list[KeywordSpan] = []
    offset = 0
    for line in text.split("\n"):
        i = 0
        while True:
            a = line.find(delimiter, i)
            if a == -1:
                break
            b = line.find(delimiter, a + 1)
            if b == -1:
                break
            keyword = line[a + 1:b]
            if keyword:
                spans.append(KeywordSpan(offset + a, offset + b + 1, keyword))
            i = b + 1
        offset += len(line) + 1
    return spans
