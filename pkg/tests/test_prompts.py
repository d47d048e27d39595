from pathlib import Path

import pytest

from tutorforge.errors import MissingSlot, NoLabels, SlotTooLong, TemplateError
from tutorforge.markup import default_grammar, parse_document
from tutorforge.prompts import (
    FeatureKind,
    INPUT_MATRIX,
    InputLimits,
    PromptLibrary,
    build_annotation_explanation_prompt,
    build_feature_prompt,
    build_fix_prompt,
    build_pseudocode_prompt,
    contains_relevance_guard,
    parse_template,
)

LIB = PromptLibrary.bundled()
G = default_grammar()

GOLDEN_DIR = Path(__file__).parent / "data" / "golden"


def test_bundled_library_has_all_templates():
    names = set(LIB.templates)
    for feature in FeatureKind:
        assert feature.value in names
    for helper in ("pseudocode", "fix-explanations", "followup-suggestions"):
        assert helper in names


def test_every_template_has_at_least_one_exemplar():
    for tpl in LIB.templates.values():
        assert len(tpl.pairs) >= 1, tpl.name


def test_exemplar_outputs_parse_cleanly():
    # template self-consistency: zero warnings, sections within the
    # template's declared set
    for tpl in LIB.templates.values():
        for _, output in tpl.pairs:
            events = parse_document(G, output + "\n", list(tpl.sections))
            warnings = [e for e in events if e.kind == "parse_warning"]
            assert not warnings, f"{tpl.name}: {warnings}"
            seen = {e.section for e in events if e.kind == "section_start"}
            assert seen <= set(tpl.sections), f"{tpl.name}: {seen}"


def test_relevance_guard_in_every_feature_prompt():
    for feature in FeatureKind:
        prompt = build_feature_prompt(
            LIB, feature,
            question="q", code="int x;", intended_behavior="b",
            prior_exchange="// [question]: q",
        )
        assert contains_relevance_guard(prompt.rendered), feature


def test_general_question_prompt_contains_question_after_marker():
    prompt = build_feature_prompt(LIB, FeatureKind.GENERAL_QUESTION,
                                  question="what is a pointer?")
    assert "// [question]: what is a pointer?" in prompt.rendered
    assert len(LIB.get("general-question").pairs) >= 1
    assert prompt.rendered.count("what is a pointer?") == 1


def test_fix_prompt_contains_code_and_intent_markers():
    prompt = build_feature_prompt(
        LIB, FeatureKind.HELP_FIX_CODE,
        code="int x = 1;", intended_behavior="set x to one",
    )
    assert "// [code-start]\nint x = 1;\n// [code-end]" in prompt.rendered
    assert "// [intended-behavior]: set x to one" in prompt.rendered


def test_missing_question_raises():
    with pytest.raises(MissingSlot):
        build_feature_prompt(LIB, FeatureKind.GENERAL_QUESTION)


def test_prompt_is_deterministic():
    a = build_feature_prompt(LIB, FeatureKind.GENERAL_QUESTION, question="q1")
    b = build_feature_prompt(LIB, FeatureKind.GENERAL_QUESTION, question="q1")
    assert a == b


def test_slots_inserted_verbatim_exactly_once():
    marker = "ZQXJKV-unique-slot-value"
    prompt = build_feature_prompt(
        LIB, FeatureKind.QUESTION_FROM_CODE,
        question=f"why {marker}?", code="int a;",
    )
    assert prompt.rendered.count(marker) == 1


def test_question_limit_enforced():
    limits = InputLimits(max_question_chars=10)
    with pytest.raises(SlotTooLong):
        build_feature_prompt(LIB, FeatureKind.GENERAL_QUESTION,
                             question="x" * 11, limits=limits)


def test_code_line_limit_enforced():
    limits = InputLimits(max_code_lines=3)
    with pytest.raises(SlotTooLong):
        build_feature_prompt(LIB, FeatureKind.EXPLAIN_CODE,
                             code="a;\nb;\nc;\nd;", limits=limits)


def test_pseudocode_prompt_embeds_code():
    prompt = build_pseudocode_prompt(LIB, "int y = 2;")
    assert "int y = 2;" in prompt.rendered
    assert prompt.expected_sections == ("pseudocode",)


def test_pseudocode_prompt_empty_code():
    with pytest.raises(MissingSlot):
        build_pseudocode_prompt(LIB, "")


def test_fix_builder_requires_both_inputs():
    with pytest.raises(MissingSlot):
        build_fix_prompt(LIB, "", "intent")
    with pytest.raises(MissingSlot):
        build_fix_prompt(LIB, "int x;", "")


class _Label:
    def __init__(self, kind, anchor_line=None, anchor_gap=None):
        self.kind = kind
        self.anchor_line = anchor_line
        self.anchor_gap = anchor_gap


def test_explanation_prompt_lists_every_label_site():
    labels = [_Label("changed", 0), _Label("removed", 2), _Label("added", anchor_gap=1)]
    prompt = build_annotation_explanation_prompt(
        LIB, ["line a", "line b", "line c"], labels, fixed_code="line a2",
    )
    assert "[0] change line 1" in prompt.rendered
    assert "[1] remove line 3" in prompt.rendered
    assert "[2] add a line after line 1" in prompt.rendered


def test_explanation_prompt_no_labels():
    with pytest.raises(NoLabels):
        build_annotation_explanation_prompt(LIB, ["x"], [], "x")


def test_fix_prompt_golden():
    prompt = build_fix_prompt(LIB, "while (p) {\n    p = p->next;\n}", "walk the list")
    golden = GOLDEN_DIR / "fix_prompt.txt"
    assert prompt.rendered == golden.read_text()


def test_followup_suggestion_template_requests_at_most_three():
    tpl = LIB.get("followup-suggestions")
    assert "at most three" in tpl.preamble


def test_input_matrix_is_exhaustive():
    assert set(INPUT_MATRIX) == set(FeatureKind)


def test_parse_template_rejects_malformed():
    with pytest.raises(TemplateError):
        parse_template("no front matter")
    with pytest.raises(TemplateError):
        parse_template("---\nfeature: x\n---\nbody without final input")
    with pytest.raises(TemplateError):
        parse_template(
            "---\nfeature: x\nstop_tokens: ['s']\n---\npre\n<<input>>\ni\n"
            "<<output>>\no\n<<end>>\n<<final-input>>\n{question} {question}"
        )
