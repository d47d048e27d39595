"""Code-to-pseudo-code scaffolding and the static function-doc store.

Pseudo-code lines come from a chained LLM call and stream to the
client line by line; function documentation is static, scraped-once
content served from a local key-value store, never generated.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Generator

from .errors import CorpusParseError, DuplicateFunctionName, EmptyTransform, MissingSlot
from .gateway import CompletionRequest, CompletionStream, Provider
from .markup import MarkupGrammar, StreamEvent, StreamParser, line_completed, parse_warning
from .prompts import DEFAULT_LIMITS, InputLimits, PromptLibrary, build_pseudocode_prompt

logger = logging.getLogger(__name__)

PSEUDOCODE_SECTION = "pseudocode"
GENERIC_LINE_EXPLANATION = "this step is part of the overall approach"

# pseudo-code should not look like finished C; these are soft quality
# signals, not hard failures
_CONCRETE_SYNTAX_MARKS = (";", "{", "}")


@dataclass(frozen=True)
class PseudoCodeLine:
    visible: str
    explanation: str
    indent_depth: int = 0

    def __post_init__(self):
        if not self.visible:
            raise ValueError("pseudo-code line must have visible text")
        if self.indent_depth < 0:
            raise ValueError("indent depth must be non-negative")

    def to_dict(self) -> dict:
        return {"visible": self.visible, "explanation": self.explanation,
                "indent_depth": self.indent_depth}

    @classmethod
    def from_dict(cls, data: dict) -> "PseudoCodeLine":
        return cls(data["visible"], data["explanation"], data.get("indent_depth", 0))


def looks_concrete(visible: str) -> bool:
    stripped = visible.rstrip()
    return stripped.endswith(";") or any(m in visible for m in ("{", "}"))


def concrete_syntax_violations(lines: list[PseudoCodeLine]) -> int:
    return sum(1 for l in lines if looks_concrete(l.visible))


def split_indent(raw_visible: str) -> tuple[int, str]:
    """Depth in two-space steps; the remainder keeps any odd space."""
    spaces = len(raw_visible) - len(raw_visible.lstrip(" "))
    depth = spaces // 2
    return depth, raw_visible[2 * depth:]


def stream_pseudocode(
    code: str,
    provider: Provider,
    *,
    library: PromptLibrary,
    grammar: MarkupGrammar,
    limits: InputLimits = DEFAULT_LIMITS,
    max_output_tokens: int | None = 2000,
    temperature: float = 0.0,
) -> Generator[StreamEvent, None, list[PseudoCodeLine]]:
    """Chained call: turn code into explained pseudo-code lines.

    Yields each completed line as it parses (with the explanation
    fallback already applied, so the stream and the return value
    agree); bounds the result at twice the input line count.
    """
    if not code:
        raise MissingSlot("code")
    prompt = build_pseudocode_prompt(library, code, limits)
    request = CompletionRequest(
        prompt.rendered,
        stop_tokens=prompt.stop_tokens,
        max_output_tokens=max_output_tokens,
        temperature=temperature,
    )
    parser = StreamParser(grammar, list(prompt.expected_sections))
    max_lines = 2 * (code.count("\n") + 1)
    lines: list[PseudoCodeLine] = []
    truncated = False

    def handle(ev: StreamEvent) -> list[StreamEvent]:
        nonlocal truncated
        if not (ev.kind == "line_completed" and ev.section == PSEUDOCODE_SECTION):
            return [ev]
        if truncated:
            return []
        if not ev.visible.strip():
            if ev.explanation is not None:
                return [parse_warning("pseudo-code line without visible text skipped",
                                      PSEUDOCODE_SECTION)]
            return []
        if len(lines) >= max_lines:
            truncated = True
            return [parse_warning(f"pseudo-code truncated at {max_lines} lines",
                                  PSEUDOCODE_SECTION)]
        out = []
        explanation = (ev.explanation or "").strip()
        if not explanation:
            explanation = GENERIC_LINE_EXPLANATION
            out.append(parse_warning("pseudo-code line missing explanation",
                                     PSEUDOCODE_SECTION))
        depth, visible = split_indent(ev.visible)
        if looks_concrete(visible):
            out.append(parse_warning("pseudo-code line looks like concrete syntax",
                                     PSEUDOCODE_SECTION))
        lines.append(PseudoCodeLine(visible, explanation, depth))
        out.append(line_completed(PSEUDOCODE_SECTION, ev.visible, explanation))
        return out

    stream = CompletionStream(provider, request)
    for chunk in stream:
        for ev in parser.feed(chunk.text):
            yield from handle(ev)
    for ev in parser.finalize():
        yield from handle(ev)
    if not lines:
        raise EmptyTransform("pseudo-code call produced no usable lines")
    return lines


def to_pseudocode(
    code: str,
    provider: Provider,
    sink: Callable[[StreamEvent], None],
    **kwargs,
) -> list[PseudoCodeLine]:
    """Sink-style facade over :func:`stream_pseudocode`."""
    gen = stream_pseudocode(code, provider, **kwargs)
    while True:
        try:
            ev = next(gen)
        except StopIteration as done:
            return done.value
        sink(ev)


# --- function documentation store ---


@dataclass(frozen=True)
class FunctionDoc:
    name: str
    summary: str
    description: str
    example_code: str
    similar_functions: tuple[str, ...] = ()

    def validate(self) -> None:
        for fld in ("name", "summary", "description", "example_code"):
            if not getattr(self, fld):
                raise ValueError(f"doc field '{fld}' must be non-empty")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "summary": self.summary,
            "description": self.description,
            "example_code": self.example_code,
            "similar_functions": list(self.similar_functions),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FunctionDoc":
        doc = cls(
            name=data["name"],
            summary=data["summary"],
            description=data["description"],
            example_code=data["example_code"],
            similar_functions=tuple(data.get("similar_functions", ())),
        )
        doc.validate()
        return doc


@dataclass(frozen=True)
class DocStore:
    entries: dict[str, FunctionDoc] = field(default_factory=dict)
    source_manifest: str = ""

    def get(self, name: str) -> FunctionDoc | None:
        return self.entries.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def lookup_docs(store: DocStore, names: list[str]) -> list[FunctionDoc]:
    """Order-preserving, deduplicated lookup; unknown names are skipped."""
    out: list[FunctionDoc] = []
    seen: set[str] = set()
    for name in names:
        if name in seen:
            continue
        seen.add(name)
        doc = store.get(name)
        if doc is None:
            logger.debug("no documentation entry for %r", name)
            continue
        out.append(doc)
    return out


def build_docstore(corpus_path: str | Path) -> DocStore:
    """Compile a doc store from a corpus directory.

    Layout: ``manifest.json`` plus one ``<function>.json`` per entry.
    """
    corpus = Path(corpus_path)
    manifest_path = corpus / "manifest.json"
    if not manifest_path.exists():
        raise CorpusParseError(str(manifest_path), "manifest.json missing")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as err:
        raise CorpusParseError(str(manifest_path), err.msg, err.lineno) from err
    entries: dict[str, FunctionDoc] = {}
    for path in sorted(corpus.glob("*.json")):
        if path.name == "manifest.json":
            continue
        try:
            data = json.loads(path.read_text())
            doc = FunctionDoc.from_dict(data)
        except json.JSONDecodeError as err:
            raise CorpusParseError(str(path), err.msg, err.lineno) from err
        except (KeyError, ValueError) as err:
            raise CorpusParseError(str(path), str(err)) from err
        if doc.name in entries:
            raise DuplicateFunctionName(doc.name)
        entries[doc.name] = doc
    return DocStore(entries=dict(sorted(entries.items())),
                    source_manifest=json.dumps(manifest, sort_keys=True))


def save_docstore(store: DocStore, path: str | Path) -> None:
    payload = {
        "manifest": json.loads(store.source_manifest) if store.source_manifest else {},
        "entries": [doc.to_dict() for doc in store.entries.values()],
    }
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_docstore(path: str | Path) -> DocStore:
    """Load a compiled store; ``load(build(x))`` round-trips exactly."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise CorpusParseError(str(path), err.msg, err.lineno) from err
    entries: dict[str, FunctionDoc] = {}
    for item in payload.get("entries", ()):
        try:
            doc = FunctionDoc.from_dict(item)
        except (KeyError, ValueError) as err:
            raise CorpusParseError(str(path), str(err)) from err
        if doc.name in entries:
            raise DuplicateFunctionName(doc.name)
        entries[doc.name] = doc
    return DocStore(entries=dict(sorted(entries.items())),
                    source_manifest=json.dumps(payload.get("manifest", {}), sort_keys=True))


def bundled_docstore() -> DocStore:
    root = resources.files("tutorforge").joinpath("docstore_data/corpus")
    with resources.as_file(root) as path:
        return build_docstore(path)
