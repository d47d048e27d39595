"""Build response documents from event streams, and render them as text.

``document_from_events`` is the one reconstruction used everywhere: the
engine builds the persisted document with it, and a client replaying
the wire events arrives at a deep-equal document, which is what the
stream/batch equivalence tests pin down.
"""

from __future__ import annotations

from ..fixer import AnnotatedRow, FixResponse
from ..markup import StreamEvent
from ..scaffold import PseudoCodeLine, split_indent
from .models import (
    Annotated,
    AnswerText,
    Disclaimer,
    FINISH_COMPLETE,
    FINISH_REFUSED,
    PseudoCode,
    Query,
    RelevantFunctions,
    ResponseDocument,
    SuggestedFollowUps,
)

_TEXTUAL_SECTIONS = ("answer", "off-topic", "unstructured")


def document_from_events(
    events: list[StreamEvent],
    query: Query,
    response_id: str,
    finish: str = FINISH_COMPLETE,
) -> ResponseDocument:
    """Deterministic reconstruction of a response from its wire events."""
    answer_parts: list[str] = []
    answer_open_section: str | None = None
    pseudo_lines: list[PseudoCodeLine] = []
    annotated_rows: list[AnnotatedRow] = []
    saw_annotated = False
    changes_parts: list[str] = []
    functions_text: list[str] = []
    followups: list[str] = []
    warnings: list[str] = []
    order: list[str] = []

    def mark(segment: str) -> None:
        if segment not in order:
            order.append(segment)

    for ev in events:
        sec = ev.section
        if ev.kind == "parse_warning":
            warnings.append(ev.detail)
        elif sec in _TEXTUAL_SECTIONS:
            if ev.kind == "section_start":
                if answer_parts and answer_open_section != sec:
                    answer_parts.append("\n")
                answer_open_section = sec
                mark("answer")
            elif ev.kind == "text_delta":
                answer_parts.append(ev.text)
        elif sec in ("pseudocode", "explained-code"):
            if ev.kind == "line_completed" and ev.visible.strip():
                depth, visible = split_indent(ev.visible)
                pseudo_lines.append(
                    PseudoCodeLine(visible, (ev.explanation or "").strip(), depth))
                mark("pseudocode")
        elif sec == "annotated":
            if ev.kind == "line_completed":
                annotated_rows.append(AnnotatedRow.from_wire(ev.visible, ev.explanation))
            if ev.kind == "section_start":
                saw_annotated = True
                mark("annotated")
        elif sec == "changes":
            if ev.kind == "text_delta":
                changes_parts.append(ev.text)
            mark("annotated")
        elif sec == "relevant-functions":
            if ev.kind == "text_delta":
                functions_text.append(ev.text)
            mark("functions")
        elif sec == "followups":
            if ev.kind == "line_completed" and ev.visible.strip():
                followups.append(ev.visible.strip())
                mark("followups")

    names = tuple(n.strip() for n in "".join(functions_text).split(",") if n.strip())
    answer_text = "".join(answer_parts).strip("\n")

    segments: list = []
    for segment in order:
        if segment == "answer" and answer_text:
            segments.append(AnswerText(answer_text))
        elif segment == "pseudocode" and pseudo_lines:
            segments.append(PseudoCode(tuple(pseudo_lines)))
        elif segment == "annotated" and (saw_annotated or changes_parts):
            segments.append(Annotated(FixResponse(
                change_summary="".join(changes_parts).strip("\n"),
                rows=annotated_rows,
                relevant_functions=list(names),
            )))
        elif segment == "functions" and names:
            segments.append(RelevantFunctions(names))
        elif segment == "followups" and followups:
            segments.append(SuggestedFollowUps(tuple(followups)))
    if finish == FINISH_REFUSED:
        segments = [AnswerText(answer_text)] if answer_text else []
    segments.append(Disclaimer())
    return ResponseDocument(
        id=response_id,
        query=query,
        segments=tuple(segments),
        finish=finish,
        warnings=tuple(warnings),
    )


def render_text(doc: ResponseDocument) -> str:
    """Plain-text rendering; hover content becomes indented sub-lines."""
    out: list[str] = []
    for segment in doc.segments:
        kind = segment.kind
        if kind == "answer":
            out.append("Answer:")
            for line in segment.text.split("\n"):
                out.append(f"  {line}")
        elif kind == "pseudocode":
            out.append("Pseudo-code:")
            for pl in segment.lines:
                out.append("  " + "  " * pl.indent_depth + pl.visible)
                out.append("  " + "  " * pl.indent_depth + f"   -> {pl.explanation}")
        elif kind == "annotated":
            fix = segment.fix
            if fix.change_summary:
                out.append("Changes:")
                for line in fix.change_summary.split("\n"):
                    out.append(f"  {line}")
            if fix.rows:
                out.append("Annotated code:")
                for row in fix.rows:
                    marker = {"unchanged": " ", "changed": "~", "removed": "-",
                              "added": "+"}[row.kind]
                    body = row.text if row.kind != "added" else "(add a line here)"
                    out.append(f"  {marker} {body}")
                    if row.explanation:
                        out.append(f"       -> {row.explanation}")
        elif kind == "functions":
            out.append("Relevant functions: " + ", ".join(segment.names))
        elif kind == "followups":
            out.append("Suggested follow-ups:")
            for i, q in enumerate(segment.questions, 1):
                out.append(f"  {i}. {q}")
        elif kind == "disclaimer":
            out.append(f"[{segment.text}]")
    return "\n".join(out) + "\n"
