"""Shared test helpers: rule-matched providers and canned completions."""

from __future__ import annotations

import pytest

from tutorforge.errors import UnknownPrompt
from tutorforge.gateway import CompletionRequest


class RuleProvider:
    """Provider for test authoring: matches prompts by contained phrases.

    Rules are ``(phrases, completion)`` pairs tried in order; the first
    rule whose phrases all occur in the prompt wins. Exact
    (prompt, completion) pairs are captured so fixtures can be frozen
    into exact-match script tables.
    """

    def __init__(self, rules, splits=()):
        self.rules = [((req,) if isinstance(req, str) else tuple(req), completion)
                      for req, completion in rules]
        self.captured: list[tuple[str, str]] = []
        self.splits = tuple(splits)
        self.name = "rule-scripted"
        self.fail_next: list[Exception] = []

    def stream(self, request: CompletionRequest):
        if self.fail_next:
            raise self.fail_next.pop(0)
        for phrases, completion in self.rules:
            if all(p in request.prompt for p in phrases):
                self.captured.append((request.prompt, completion))
                prev = 0
                for cut in self.splits:
                    if 0 < cut < len(completion):
                        yield completion[prev:cut]
                        prev = cut
                yield completion[prev:]
                return None
        raise UnknownPrompt(f"no rule matches prompt: {request.prompt[:160]!r}")


# canned completions reused across engine/api/cli tests

GQ_QUESTION = "what is a pointer?"
GQ_COMPLETION = (
    "// [answer]: A pointer stores a memory address; dereferencing it with `*` "
    "reads the value at that address.\n"
    "// [code-start]\n"
    "int *p = &x;\n"
    "printf(\"%d\\n\", *p);\n"
    "// [code-end]\n"
    "// [relevant-functions]: printf, nosuchfn\n"
    "// [stop]\n"
)
PSEUDO_COMPLETION = (
    "// [pseudocode-start]\n"
    "declare p pointing at x /// stores the address of x in p\n"
    "print the value p points to /// follows the pointer and prints that integer\n"
    "// [pseudocode-end]\n"
    "// [stop]\n"
)
SUGGESTIONS_COMPLETION = (
    "// [followups-start]\n"
    "What is a null pointer?\n"
    "How do pointers relate to arrays?\n"
    "// [followups-end]\n"
    "// [stop]\n"
)
REFUSAL_COMPLETION = (
    "// [off-topic]: I can only help with C programming questions for this course.\n"
    "// [stop]\n"
)

# rule phrases that uniquely identify each chained template
PSEUDO_TEMPLATE_PHRASE = "Rewrite the given C code as concise pseudo-code"
SUGGESTIONS_TEMPLATE_PHRASE = "Suggest at most three short follow-up questions"
EXPLANATIONS_TEMPLATE_PHRASE = "numbered annotation sites"


def default_rules(question=GQ_QUESTION, completion=GQ_COMPLETION):
    return [
        (SUGGESTIONS_TEMPLATE_PHRASE, SUGGESTIONS_COMPLETION),
        (PSEUDO_TEMPLATE_PHRASE, PSEUDO_COMPLETION),
        (f"// [question]: {question}", completion),
    ]


@pytest.fixture
def fake_time():
    state = {"now": 1_770_000_000.0}

    class Clock:
        def __call__(self):
            return state["now"]

        def advance(self, seconds):
            state["now"] += seconds

    return Clock()
