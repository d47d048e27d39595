"""Few-shot prompt templates for every assistance feature.

Templates live as human-editable text files (YAML front-matter + body)
so a course can swap exemplars without touching code. The body holds
the instruction preamble, one or more ``<<input>>``/``<<output>>``
exemplar pairs, and the ``<<final-input>>`` skeleton whose ``{slot}``
placeholders are filled verbatim at request time.

Every few-shot output must parse cleanly under the stream markup for
its declared sections; a test enforces this across the bundled set.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

import yaml

from .errors import MissingSlot, NoLabels, SlotTooLong, TemplateError

if TYPE_CHECKING:  # pragma: no cover
    from .service.models import ResponseDocument


class FeatureKind(str, enum.Enum):
    GENERAL_QUESTION = "general-question"
    QUESTION_FROM_CODE = "question-from-code"
    EXPLAIN_CODE = "explain-code"
    HELP_FIX_CODE = "help-fix-code"
    HELP_WRITE_CODE = "help-write-code"
    INLINE_EXPLORATION = "inline-exploration"
    FOLLOW_UP = "follow-up"


class InlineKind(str, enum.Enum):
    EXAMPLE_CODE = "example-code"
    DOCUMENTATION = "documentation"
    ASK_QUESTION = "ask-question"


# helper chains that are not user-facing features
PSEUDOCODE_TEMPLATE = "pseudocode"
FIX_EXPLANATIONS_TEMPLATE = "fix-explanations"
FOLLOWUP_SUGGESTIONS_TEMPLATE = "followup-suggestions"

# Which inputs each feature requires / rejects. The service enforces
# rejection (InvalidInputCombination); builders enforce presence.
INPUT_MATRIX: dict[FeatureKind, tuple[frozenset, frozenset]] = {
    FeatureKind.GENERAL_QUESTION: (frozenset({"question"}), frozenset({"code", "intended_behavior"})),
    FeatureKind.QUESTION_FROM_CODE: (frozenset({"question", "code"}), frozenset({"intended_behavior"})),
    FeatureKind.EXPLAIN_CODE: (frozenset({"code"}), frozenset({"question", "intended_behavior"})),
    FeatureKind.HELP_FIX_CODE: (frozenset({"code", "intended_behavior"}), frozenset({"question"})),
    FeatureKind.HELP_WRITE_CODE: (frozenset({"question"}), frozenset({"code", "intended_behavior"})),
    FeatureKind.INLINE_EXPLORATION: (frozenset({"question"}), frozenset({"code", "intended_behavior"})),
    FeatureKind.FOLLOW_UP: (frozenset({"question", "prior_exchange"}), frozenset({"code", "intended_behavior"})),
}

# Features whose responses accept follow-up questions.
FOLLOWUP_CAPABLE = frozenset({
    FeatureKind.GENERAL_QUESTION,
    FeatureKind.QUESTION_FROM_CODE,
    FeatureKind.EXPLAIN_CODE,
    FeatureKind.HELP_WRITE_CODE,
})

# The refusal clause every feature prompt must contain (checked by a
# containment test; the off-topic marker is what the parser detects).
RELEVANCE_GUARD = (
    "If the request is not about C programming or this course, do not "
    "answer it: reply with a single \"// [off-topic]:\" line explaining "
    "that only C programming questions are supported."
)

def contains_relevance_guard(text: str) -> bool:
    """Whitespace-insensitive containment check for the guard clause.

    Template files wrap the sentence at column 72; compare on
    space-collapsed text.
    """
    return " ".join(RELEVANCE_GUARD.split()) in " ".join(text.split())


SLOT_NAMES = ("question", "code", "intended_behavior", "prior_exchange",
              "annotated_sites")
_SLOT_RE = re.compile(r"\{(" + "|".join(SLOT_NAMES) + r")\}")


@dataclass(frozen=True)
class InputLimits:
    max_question_chars: int = 2000
    max_code_lines: int = 300
    max_exchange_chars: int = 20000

    def check(self, slot: str, value: str) -> None:
        if slot in ("question", "intended_behavior"):
            if len(value) > self.max_question_chars:
                raise SlotTooLong(slot, f"{self.max_question_chars} characters")
        elif slot == "code":
            if value.count("\n") + 1 > self.max_code_lines:
                raise SlotTooLong(slot, f"{self.max_code_lines} lines")
        elif slot in ("prior_exchange", "annotated_sites"):
            if len(value) > self.max_exchange_chars:
                raise SlotTooLong(slot, f"{self.max_exchange_chars} characters")


DEFAULT_LIMITS = InputLimits()


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    stop_tokens: tuple[str, ...]
    sections: tuple[str, ...]
    preamble: str
    pairs: tuple[tuple[str, str], ...]
    input_skeleton: str

    @property
    def slots(self) -> tuple[str, ...]:
        return tuple(m.group(1) for m in _SLOT_RE.finditer(self.input_skeleton))


@dataclass(frozen=True)
class PromptText:
    rendered: str
    expected_sections: tuple[str, ...]
    stop_tokens: tuple[str, ...]


_FM_DELIM = "---"
_IN = "<<input>>"
_OUT = "<<output>>"
_END = "<<end>>"
_FINAL = "<<final-input>>"


def parse_template(text: str, name_hint: str = "<template>") -> PromptTemplate:
    lines = text.split("\n")
    if not lines or lines[0].strip() != _FM_DELIM:
        raise TemplateError(f"{name_hint}: missing front-matter")
    try:
        close = lines.index(_FM_DELIM, 1)
    except ValueError:
        raise TemplateError(f"{name_hint}: unterminated front-matter") from None
    try:
        meta = yaml.safe_load("\n".join(lines[1:close])) or {}
    except yaml.YAMLError as err:
        raise TemplateError(f"{name_hint}: bad front-matter: {err}") from err
    name = meta.get("feature")
    if not name:
        raise TemplateError(f"{name_hint}: front-matter needs a 'feature' key")
    stop_tokens = tuple(meta.get("stop_tokens", ()))
    if not stop_tokens:
        raise TemplateError(f"{name}: at least one stop token required")
    sections = tuple(meta.get("sections", ()))

    body = "\n".join(lines[close + 1:])
    if _FINAL not in body:
        raise TemplateError(f"{name}: missing {_FINAL} block")
    examples_part, final_part = body.split(_FINAL, 1)
    if _IN not in examples_part:
        raise TemplateError(f"{name}: at least one {_IN}/{_OUT} exemplar required")
    preamble, _, rest = examples_part.partition(_IN)
    pairs: list[tuple[str, str]] = []
    for block in (_IN + rest).split(_IN)[1:]:
        if _OUT not in block or _END not in block:
            raise TemplateError(f"{name}: exemplar missing {_OUT} or {_END}")
        pair_in, _, tail = block.partition(_OUT)
        pair_out, _, _ = tail.partition(_END)
        pairs.append((pair_in.strip("\n"), pair_out.strip("\n")))
    skeleton = final_part.strip("\n")
    if not skeleton:
        raise TemplateError(f"{name}: empty input skeleton")
    slot_list = [m.group(1) for m in _SLOT_RE.finditer(skeleton)]
    if len(slot_list) != len(set(slot_list)):
        raise TemplateError(f"{name}: duplicate slot in skeleton")
    return PromptTemplate(
        name=name,
        stop_tokens=stop_tokens,
        sections=sections,
        preamble=preamble.strip("\n"),
        pairs=tuple(pairs),
        input_skeleton=skeleton,
    )


@dataclass
class PromptLibrary:
    templates: dict[str, PromptTemplate] = field(default_factory=dict)

    def get(self, name: str) -> PromptTemplate:
        try:
            return self.templates[name]
        except KeyError:
            raise TemplateError(f"no template named '{name}'") from None

    @classmethod
    def load_dir(cls, path: str | Path) -> "PromptLibrary":
        lib = cls()
        files = sorted(Path(path).glob("*.prompt"))
        if not files:
            raise TemplateError(f"no *.prompt files in {path}")
        for f in files:
            tpl = parse_template(f.read_text(), name_hint=str(f))
            if tpl.name in lib.templates:
                raise TemplateError(f"duplicate template for '{tpl.name}'")
            lib.templates[tpl.name] = tpl
        return lib

    @classmethod
    def bundled(cls) -> "PromptLibrary":
        root = resources.files("tutorforge").joinpath("prompts_data")
        with resources.as_file(root) as path:
            return cls.load_dir(path)


def _fill(template: PromptTemplate, slots: dict[str, str],
          limits: InputLimits) -> PromptText:
    needed = set(template.slots)
    for slot in needed:
        value = slots.get(slot)
        if value is None or value == "":
            raise MissingSlot(slot)
        limits.check(slot, value)

    def sub(match: re.Match) -> str:
        return slots[match.group(1)]

    filled = _SLOT_RE.sub(sub, template.input_skeleton)
    parts = [template.preamble, ""]
    for pair_in, pair_out in template.pairs:
        parts.append(pair_in)
        parts.append(pair_out)
        parts.append(template.stop_tokens[0])
        parts.append("")
    parts.append(filled)
    rendered = "\n".join(parts).rstrip("\n") + "\n"
    return PromptText(rendered=rendered, expected_sections=template.sections,
                      stop_tokens=template.stop_tokens)


def build_feature_prompt(
    library: PromptLibrary,
    feature: FeatureKind,
    question: str | None = None,
    code: str | None = None,
    intended_behavior: str | None = None,
    prior_exchange: str | None = None,
    limits: InputLimits = DEFAULT_LIMITS,
) -> PromptText:
    required, _ = INPUT_MATRIX[feature]
    provided = {
        "question": question,
        "code": code,
        "intended_behavior": intended_behavior,
        "prior_exchange": prior_exchange,
    }
    for slot in sorted(required):
        if not provided.get(slot):
            raise MissingSlot(slot)
    template = library.get(feature.value)
    return _fill(template, {k: v for k, v in provided.items() if v}, limits)


def build_pseudocode_prompt(
    library: PromptLibrary, code: str, limits: InputLimits = DEFAULT_LIMITS,
) -> PromptText:
    if not code:
        raise MissingSlot("code")
    return _fill(library.get(PSEUDOCODE_TEMPLATE), {"code": code}, limits)


def build_fix_prompt(
    library: PromptLibrary, buggy_code: str, intent: str,
    limits: InputLimits = DEFAULT_LIMITS,
) -> PromptText:
    if not buggy_code:
        raise MissingSlot("code")
    if not intent:
        raise MissingSlot("intended_behavior")
    return _fill(
        library.get(FeatureKind.HELP_FIX_CODE.value),
        {"code": buggy_code, "intended_behavior": intent},
        limits,
    )


def build_annotation_explanation_prompt(
    library: PromptLibrary,
    buggy_lines: list[str],
    labels: list,
    fixed_code: str,
    limits: InputLimits = DEFAULT_LIMITS,
) -> PromptText:
    """Prompt the LLM to explain each annotation site.

    ``labels`` are fix-annotator labels (kind + anchor); each becomes a
    numbered site line the model must answer with ``[k] /// ...``.
    """
    if not labels:
        raise NoLabels("no annotation sites to explain")
    sites = []
    for k, label in enumerate(labels):
        if label.kind == "changed":
            sites.append(f"[{k}] change line {label.anchor_line + 1}: "
                         f"\"{buggy_lines[label.anchor_line]}\"")
        elif label.kind == "removed":
            sites.append(f"[{k}] remove line {label.anchor_line + 1}: "
                         f"\"{buggy_lines[label.anchor_line]}\"")
        else:
            sites.append(f"[{k}] add a line after line {label.anchor_gap}")
    return _fill(
        library.get(FIX_EXPLANATIONS_TEMPLATE),
        {"annotated_sites": "\n".join(sites), "code": fixed_code},
        limits,
    )


def build_followup_suggestion_prompt(
    library: PromptLibrary,
    response: "ResponseDocument",
    limits: InputLimits = DEFAULT_LIMITS,
) -> PromptText:
    exchange = flatten_exchange(response)
    return _fill(
        library.get(FOLLOWUP_SUGGESTIONS_TEMPLATE),
        {"prior_exchange": exchange},
        limits,
    )


def flatten_exchange(response: "ResponseDocument") -> str:
    """Plain-text rendering of one exchange, used as chained context.

    Follow-up prompts embed this verbatim; keep it stable, golden
    transcripts depend on it.
    """
    query = response.query
    lines = []
    if query.code:
        lines.append("// [code-start]")
        lines.append(query.code)
        lines.append("// [code-end]")
    if query.question:
        lines.append(f"// [question]: {query.question}")
    for segment in response.segments:
        kind = getattr(segment, "kind", None)
        if kind == "answer":
            lines.append(f"// [answer]: {segment.text}")
        elif kind == "pseudocode":
            for pl in segment.lines:
                lines.append("  " * pl.indent_depth + pl.visible)
        elif kind == "annotated":
            if segment.fix.change_summary:
                lines.append(f"// [changes]: {segment.fix.change_summary}")
        elif kind == "functions":
            if segment.names:
                lines.append("// [relevant-functions]: " + ", ".join(segment.names))
    return "\n".join(lines)
