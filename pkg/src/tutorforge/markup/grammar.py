"""Markup grammar: the wire contract between prompts and the parser.

Concrete default scheme:

* single-line section:  ``// [<id>]:`` followed by the content until
  end of line (one space after the marker is consumed if present);
* block section: a line ``// [<id>-start]`` up to a line
  ``// [<id>-end]``; inside, each line may carry a trailing
  explanation separated by ``///``;
* C keywords inside prose are delimited with backticks.

The grammar object is data, so prompt templates and parser always agree
and alternate token spellings stay configurable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import AmbiguousGrammar

UNSTRUCTURED_SECTION = "unstructured"

MARKER_SINGLE = "single"
MARKER_BEGIN = "begin"
MARKER_END = "end"


@dataclass(frozen=True)
class MarkupGrammar:
    single_line_sections: dict[str, str]
    block_sections: dict[str, tuple[str, str]]
    line_explanation_separator: str = "///"
    keyword_delimiter: str = "`"

    # derived lookup tables
    markers: tuple[tuple[str, str, str], ...] = field(init=False, repr=False)

    def __post_init__(self):
        markers: list[tuple[str, str, str]] = []
        for sec, marker in self.single_line_sections.items():
            markers.append((marker, MARKER_SINGLE, sec))
        for sec, (begin, end) in self.block_sections.items():
            markers.append((begin, MARKER_BEGIN, sec))
            markers.append((end, MARKER_END, sec))
        seen: set[str] = set()
        for text, _, _ in markers:
            if not text:
                raise AmbiguousGrammar("empty marker")
            if text in seen:
                raise AmbiguousGrammar(f"duplicate marker {text!r}")
            seen.add(text)
        for a, _, _ in markers:
            for b, _, _ in markers:
                if a is not b and b.startswith(a) and a != b:
                    raise AmbiguousGrammar(f"marker {a!r} is a prefix of {b!r}")
        sep = self.line_explanation_separator
        if not sep:
            raise AmbiguousGrammar("empty line-explanation separator")
        if any(sep == text for text, _, _ in markers):
            raise AmbiguousGrammar("separator equals a marker")
        if UNSTRUCTURED_SECTION in self.single_line_sections or \
                UNSTRUCTURED_SECTION in self.block_sections:
            raise AmbiguousGrammar(f"section id {UNSTRUCTURED_SECTION!r} is reserved")
        object.__setattr__(self, "markers", tuple(markers))

    def end_token(self, section: str) -> str:
        return self.block_sections[section][1]

    def to_dict(self) -> dict:
        return {
            "single_line_sections": dict(self.single_line_sections),
            "block_sections": {k: list(v) for k, v in self.block_sections.items()},
            "line_explanation_separator": self.line_explanation_separator,
            "keyword_delimiter": self.keyword_delimiter,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarkupGrammar":
        return cls(
            single_line_sections=dict(data["single_line_sections"]),
            block_sections={k: (v[0], v[1]) for k, v in data["block_sections"].items()},
            line_explanation_separator=data.get("line_explanation_separator", "///"),
            keyword_delimiter=data.get("keyword_delimiter", "`"),
        )


SINGLE_LINE_IDS = ("answer", "changes", "relevant-functions", "off-topic")
BLOCK_IDS = ("code", "pseudocode", "explained-code", "explanations", "followups")


def default_grammar() -> MarkupGrammar:
    return MarkupGrammar(
        single_line_sections={sec: f"// [{sec}]:" for sec in SINGLE_LINE_IDS},
        block_sections={
            sec: (f"// [{sec}-start]", f"// [{sec}-end]") for sec in BLOCK_IDS
        },
    )
