"""Source normalization: comment stripping and canonical reformatting.

Both sides of the line matcher (the student's buggy code and the
LLM-fixed code) pass through here first, so the matcher only ever sees
comment-free, consistently indented text.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceLine:
    raw: str          # line as displayed (post-reformat)
    normalized: str   # whitespace-squashed form used for matching
    index: int        # 0-based line number in the reformatted document


def strip_comments(source: str, warnings: list[str] | None = None) -> str:
    """Remove ``//`` and ``/* */`` comments from C source.

    Newlines inside block comments are kept so line numbers stay
    stable; comment-like sequences inside string and character literals
    are preserved. An unterminated block comment strips the remainder
    and reports into ``warnings`` when a list is passed.
    """
    out: list[str] = []
    i = 0
    n = len(source)
    state = "code"  # code | string | char | line_comment | block_comment
    while i < n:
        c = source[i]
        nxt = source[i + 1] if i + 1 < n else ""
        if state == "code":
            if c == "/" and nxt == "/":
                state = "line_comment"
                i += 2
            elif c == "/" and nxt == "*":
                state = "block_comment"
                i += 2
            elif c == '"':
                state = "string"
                out.append(c)
                i += 1
            elif c == "'":
                state = "char"
                out.append(c)
                i += 1
            else:
                out.append(c)
                i += 1
        elif state == "string":
            if c == "\\" and nxt:
                out.append(c)
                out.append(nxt)
                i += 2
            else:
                if c == '"':
                    state = "code"
                out.append(c)
                i += 1
        elif state == "char":
            if c == "\\" and nxt:
                out.append(c)
                out.append(nxt)
                i += 2
            else:
                if c == "'":
                    state = "code"
                out.append(c)
                i += 1
        elif state == "line_comment":
            if c == "\n":
                state = "code"
                out.append(c)
            i += 1
        else:  # block_comment
            if c == "*" and nxt == "/":
                state = "code"
                i += 2
            else:
                if c == "\n":
                    out.append(c)
                i += 1
    if state == "block_comment" and warnings is not None:
        warnings.append("unterminated block comment; remainder stripped")
    return "".join(out)


def _brace_delta(line: str) -> tuple[int, int]:
    """Opening/closing brace counts outside string and char literals."""
    opens = closes = 0
    state = "code"
    i = 0
    while i < len(line):
        c = line[i]
        nxt = line[i + 1] if i + 1 < len(line) else ""
        if state == "code":
            if c == "{":
                opens += 1
            elif c == "}":
                closes += 1
            elif c == '"':
                state = "string"
            elif c == "'":
                state = "char"
        elif state in ("string", "char"):
            if c == "\\" and nxt:
                i += 2
                continue
            if (state == "string" and c == '"') or (state == "char" and c == "'"):
                state = "code"
        i += 1
    return opens, closes


def reformat(source: str) -> str:
    """Canonical layout: brace-depth x 4 spaces, no trailing blanks.

    Idempotent best-effort pass: trailing whitespace trimmed, leading
    and trailing blank lines dropped, interior blank runs collapsed to
    one, indentation recomputed from brace depth. Line content is never
    altered, only surrounding whitespace.
    """
    text = source.replace("\r\n", "\n").replace("\r", "\n")
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and lines[0] == "":
        lines.pop(0)
    while lines and lines[-1] == "":
        lines.pop()
    collapsed: list[str] = []
    for ln in lines:
        if ln == "" and collapsed and collapsed[-1] == "":
            continue
        collapsed.append(ln)
    out: list[str] = []
    depth = 0
    for ln in collapsed:
        stripped = ln.strip()
        if not stripped:
            out.append("")
            continue
        opens, closes = _brace_delta(stripped)
        lead_closes = 0
        for ch in stripped:
            if ch == "}":
                lead_closes += 1
            elif ch in " \t":
                continue
            else:
                break
        indent = max(depth - lead_closes, 0)
        out.append(" " * (4 * indent) + stripped)
        depth = max(depth + opens - closes, 0)
    return "\n".join(out)


def _squash(line: str) -> str:
    return " ".join(line.split())


def normalize_lines(source: str, warnings: list[str] | None = None) -> list[SourceLine]:
    """Full normalization: strip comments, reformat, split into lines."""
    formatted = reformat(strip_comments(source, warnings))
    if formatted == "":
        return []
    return [
        SourceLine(raw=raw, normalized=_squash(raw), index=i)
        for i, raw in enumerate(formatted.split("\n"))
    ]
