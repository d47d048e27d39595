"""The five-step help-fix-code pipeline.

1. normalize the buggy code; 2. have the LLM produce a fixed version
plus a paragraph of changes (the paragraph streams to the client, the
fixed code never does — the client only sees a live line counter);
3. match lines statically; 4. derive changed/removed/added labels;
5. have the LLM explain each label.

The guardrail is enforced twice: structurally (no fixed-code text is
ever placed in the response) and by a leak scan over the serialized
response before it is returned.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Generator

from ..errors import EmptyTransform, GuardrailViolation
from ..gateway import CompletionRequest, CompletionStream, Provider
from ..markup import (
    MarkupGrammar,
    StreamParser,
    StreamEvent,
    line_completed,
    parse_warning,
    progress_line_count,
    section_end,
    section_start,
    text_delta,
)
from ..prompts import (
    DEFAULT_LIMITS,
    InputLimits,
    PromptLibrary,
    build_annotation_explanation_prompt,
    build_fix_prompt,
)
from .matching import (
    LABEL_ADDED,
    LABEL_CHANGED,
    LABEL_REMOVED,
    AnnotationLabel,
    annotate,
    match_lines,
)
from .normalize import SourceLine, normalize_lines

ANNOTATED_SECTION = "annotated"

ROW_UNCHANGED = "unchanged"
ROW_CHANGED = "changed"
ROW_REMOVED = "removed"
ROW_ADDED = "added"

_ROW_SIGILS = {ROW_UNCHANGED: "=", ROW_CHANGED: "~", ROW_REMOVED: "-", ROW_ADDED: "+"}
_SIGIL_ROWS = {v: k for k, v in _ROW_SIGILS.items()}

GENERIC_EXPLANATION = "review this line against the intended behavior"
NO_ISSUE_TEXT = (
    "No issue was found in the code itself; the problem may lie outside it, "
    "for example in how the program is compiled, invoked, or fed input."
)

_SITE_RE = re.compile(r"^\[(\d+)\]$")


@dataclass(frozen=True)
class AnnotatedRow:
    kind: str                 # unchanged | changed | removed | added
    text: str = ""            # buggy line text; empty for added rows
    explanation: str | None = None

    def wire_visible(self) -> str:
        return f"{_ROW_SIGILS[self.kind]} {self.text}".rstrip() if self.text \
            else _ROW_SIGILS[self.kind]

    @classmethod
    def from_wire(cls, visible: str, explanation: str | None) -> "AnnotatedRow":
        sigil, _, text = visible.partition(" ")
        kind = _SIGIL_ROWS.get(sigil)
        if kind is None:
            raise ValueError(f"bad annotated row sigil in {visible!r}")
        return cls(kind=kind, text=text, explanation=explanation)


@dataclass
class FixResponse:
    change_summary: str
    rows: list[AnnotatedRow] = field(default_factory=list)
    relevant_functions: list[str] = field(default_factory=list)
    refused: str | None = None

    def to_dict(self) -> dict:
        out = {
            "change_summary": self.change_summary,
            "rows": [
                {"kind": r.kind, "text": r.text,
                 **({"explanation": r.explanation} if r.explanation is not None else {})}
                for r in self.rows
            ],
            "relevant_functions": list(self.relevant_functions),
        }
        if self.refused is not None:
            out["refused"] = self.refused
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FixResponse":
        return cls(
            change_summary=data["change_summary"],
            rows=[AnnotatedRow(r["kind"], r.get("text", ""), r.get("explanation"))
                  for r in data["rows"]],
            relevant_functions=list(data.get("relevant_functions", ())),
            refused=data.get("refused"),
        )


def _collect_strings(value) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, dict):
        return [s for v in value.values() for s in _collect_strings(v)]
    if isinstance(value, (list, tuple)):
        return [s for v in value for s in _collect_strings(v)]
    return []


def scan_for_leaks(
    serialized: dict | str,
    buggy_normalized: set[str],
    fixed_normalized: list[str],
) -> list[str]:
    """Fixed-only normalized lines that appear anywhere in a response.

    Scans the decoded string values (JSON escaping must not mask a
    leak), comparing whitespace-squashed text. Zero tolerance: callers
    treat any hit as a guardrail violation.
    """
    if isinstance(serialized, str):
        serialized = json.loads(serialized)
    haystacks = [" ".join(s.split()) for s in _collect_strings(serialized)]
    leaks = []
    for line in dict.fromkeys(fixed_normalized):
        if not line or line in buggy_normalized:
            continue
        if any(line in hay for hay in haystacks):
            leaks.append(line)
    return leaks


def _rows_from_labels(
    buggy: list[SourceLine],
    labels: list[AnnotationLabel],
) -> list[AnnotatedRow]:
    by_line: dict[int, AnnotationLabel] = {}
    by_gap: dict[int, list[AnnotationLabel]] = {}
    for label in labels:
        if label.kind == LABEL_ADDED:
            by_gap.setdefault(label.anchor_gap, []).append(label)
        else:
            by_line[label.anchor_line] = label
    rows: list[AnnotatedRow] = []
    for i in range(len(buggy) + 1):
        for added in by_gap.get(i, ()):
            rows.append(AnnotatedRow(ROW_ADDED, "", added.explanation or GENERIC_EXPLANATION))
        if i < len(buggy):
            label = by_line.get(i)
            if label is None:
                rows.append(AnnotatedRow(ROW_UNCHANGED, buggy[i].raw))
            else:
                kind = ROW_CHANGED if label.kind == LABEL_CHANGED else ROW_REMOVED
                rows.append(AnnotatedRow(kind, buggy[i].raw,
                                         label.explanation or GENERIC_EXPLANATION))
    return rows


def stream_fix_pipeline(
    buggy: str,
    intent: str,
    provider: Provider,
    *,
    library: PromptLibrary,
    grammar: MarkupGrammar,
    limits: InputLimits = DEFAULT_LIMITS,
    max_output_tokens: int | None = 2000,
    temperature: float = 0.0,
) -> Generator[StreamEvent, None, FixResponse]:
    warnings: list[str] = []
    buggy_src = normalize_lines(buggy, warnings)
    for w in warnings:
        yield parse_warning(w)
    if not buggy_src:
        raise EmptyTransform("code is empty after comment stripping")
    buggy_display = "\n".join(l.raw for l in buggy_src)

    prompt = build_fix_prompt(library, buggy_display, intent, limits)
    request = CompletionRequest(
        prompt.rendered,
        stop_tokens=prompt.stop_tokens,
        max_output_tokens=max_output_tokens,
        temperature=temperature,
    )
    parser = StreamParser(grammar, list(prompt.expected_sections))
    fixed_lines_raw: list[str] = []
    summary_parts: list[str] = []
    functions_text_parts: list[str] = []
    refusal_parts: list[str] = []
    saw_code_section = False

    def handle(ev: StreamEvent) -> list[StreamEvent]:
        nonlocal saw_code_section
        if ev.section == "code":
            if ev.kind == "section_start":
                saw_code_section = True
            elif ev.kind == "line_completed":
                fixed_lines_raw.append(ev.visible)
                return [progress_line_count(len(fixed_lines_raw))]
            return []
        if ev.section == "relevant-functions":
            if ev.kind == "text_delta":
                functions_text_parts.append(ev.text)
            return []
        if ev.section == "changes" and ev.kind == "text_delta":
            summary_parts.append(ev.text)
        if ev.section == "off-topic" and ev.kind == "text_delta":
            refusal_parts.append(ev.text)
        return [ev]

    stream = CompletionStream(provider, request)
    for chunk in stream:
        for ev in parser.feed(chunk.text):
            yield from handle(ev)
    for ev in parser.finalize():
        yield from handle(ev)

    if refusal_parts:
        return FixResponse(change_summary="", refused="".join(refusal_parts))

    functions = [n.strip() for n in "".join(functions_text_parts).split(",") if n.strip()]
    change_summary = "".join(summary_parts)

    if not saw_code_section or not fixed_lines_raw:
        raise EmptyTransform("fix call produced no fixed code to compare against")

    fixed_src = normalize_lines("\n".join(fixed_lines_raw))
    buggy_norm = [l.normalized for l in buggy_src]
    fixed_norm = [l.normalized for l in fixed_src]
    matching = match_lines(buggy_norm, fixed_norm)
    labels = annotate(buggy_norm, fixed_norm, matching)

    if labels:
        labels = yield from _stream_explanations(
            labels, buggy_src, fixed_src, provider,
            library=library, grammar=grammar, limits=limits,
            max_output_tokens=max_output_tokens, temperature=temperature,
        )
    else:
        extra = NO_ISSUE_TEXT
        if change_summary:
            change_summary = change_summary + "\n" + extra
        else:
            change_summary = extra
        yield section_start("changes")
        yield text_delta("changes", extra)
        yield section_end("changes")

    rows = _rows_from_labels(buggy_src, labels)
    fix = FixResponse(
        change_summary=change_summary,
        rows=rows,
        relevant_functions=functions,
    )
    leaks = scan_for_leaks(fix.to_dict(), set(buggy_norm), fixed_norm)
    if leaks:
        raise GuardrailViolation(leaks)

    yield section_start(ANNOTATED_SECTION)
    for row in rows:
        yield line_completed(ANNOTATED_SECTION, row.wire_visible(), row.explanation)
    yield section_end(ANNOTATED_SECTION)
    return fix


def run_fix_pipeline(
    buggy: str,
    intent: str,
    provider: Provider,
    sink: Callable[[StreamEvent], None],
    **kwargs,
) -> FixResponse:
    """Sink-style facade over :func:`stream_fix_pipeline`."""
    gen = stream_fix_pipeline(buggy, intent, provider, **kwargs)
    while True:
        try:
            ev = next(gen)
        except StopIteration as done:
            return done.value
        sink(ev)


def _stream_explanations(
    labels: list[AnnotationLabel],
    buggy_src: list[SourceLine],
    fixed_src: list[SourceLine],
    provider: Provider,
    *,
    library: PromptLibrary,
    grammar: MarkupGrammar,
    limits: InputLimits,
    max_output_tokens: int | None,
    temperature: float,
) -> Generator[StreamEvent, None, list[AnnotationLabel]]:
    fixed_display = "\n".join(l.raw for l in fixed_src)
    prompt = build_annotation_explanation_prompt(
        library, [l.raw for l in buggy_src], labels, fixed_display, limits,
    )
    request = CompletionRequest(
        prompt.rendered,
        stop_tokens=prompt.stop_tokens,
        max_output_tokens=max_output_tokens,
        temperature=temperature,
    )
    parser = StreamParser(grammar, list(prompt.expected_sections))
    explanations: dict[int, str] = {}
    raw_lines = 0

    def handle(ev: StreamEvent) -> list[StreamEvent]:
        nonlocal raw_lines
        if ev.kind == "line_completed" and ev.section == "explanations":
            raw_lines += 1
            out: list[StreamEvent] = [progress_line_count(raw_lines)]
            m = _SITE_RE.match(ev.visible.strip())
            if m is None:
                out.append(parse_warning(
                    f"unparseable explanation line {ev.visible!r} dropped"))
                return out
            idx = int(m.group(1))
            if idx >= len(labels):
                out.append(parse_warning(f"explanation for unknown site {idx} dropped"))
                return out
            explanations[idx] = (ev.explanation or "").strip()
            return out
        if ev.kind == "parse_warning":
            return [ev]
        return []

    stream = CompletionStream(provider, request)
    for chunk in stream:
        for ev in parser.feed(chunk.text):
            yield from handle(ev)
    for ev in parser.finalize():
        yield from handle(ev)

    return [
        label.with_explanation(explanations.get(i) or GENERIC_EXPLANATION)
        for i, label in enumerate(labels)
    ]
