import random

import pytest
from hypothesis import given, settings, strategies as st

from tutorforge.errors import AmbiguousGrammar, ParserFinalized
from tutorforge.markup import (
    MarkupGrammar,
    StreamParser,
    UNSTRUCTURED_SECTION,
    coalesce_deltas,
    default_grammar,
    line_completed,
    parse_document,
    parse_warning,
    section_end,
    section_start,
    text_delta,
)

G = default_grammar()


def batch(text, expected=None):
    return coalesce_deltas(parse_document(G, text, expected))


def chunked(text, cuts, expected=None):
    parser = StreamParser(G, expected)
    events = []
    prev = 0
    for cut in [*cuts, len(text)]:
        events.extend(parser.feed(text[prev:cut]))
        prev = cut
    events.extend(parser.finalize())
    return coalesce_deltas(events)


# --- hand-written expected traces ---

def test_single_line_section_trace():
    assert batch("// [answer]: use `malloc` here\n") == [
        section_start("answer"),
        text_delta("answer", "use `malloc` here"),
        section_end("answer"),
    ]


def test_block_section_line_with_explanation():
    doc = "// [pseudocode-start]\nx = x + 1; /// increments x\n// [pseudocode-end]\n"
    assert batch(doc) == [
        section_start("pseudocode"),
        line_completed("pseudocode", "x = x + 1;", "increments x"),
        section_end("pseudocode"),
    ]


def test_block_line_without_separator_has_no_explanation():
    doc = "// [followups-start]\nwhat is a pointer?\n// [followups-end]\n"
    assert batch(doc) == [
        section_start("followups"),
        line_completed("followups", "what is a pointer?", None),
        section_end("followups"),
    ]


def test_two_sections_and_unstructured_prefix():
    doc = "hi there\n// [answer]: ok\n"
    assert batch(doc) == [
        parse_warning("unstructured content outside any section"),
        section_start(UNSTRUCTURED_SECTION),
        text_delta(UNSTRUCTURED_SECTION, "hi there\n"),
        section_end(UNSTRUCTURED_SECTION),
        section_start("answer"),
        text_delta("answer", "ok"),
        section_end("answer"),
    ]


def test_unterminated_block_warns_on_finalize():
    doc = "// [code-start]\nint x;\n"
    assert batch(doc) == [
        section_start("code"),
        line_completed("code", "int x;", None),
        parse_warning("unterminated section 'code'", "code"),
        section_end("code"),
    ]


def test_marker_inside_block_closes_with_warning():
    doc = "// [code-start]\nint x;\n// [answer]: drifted\n"
    assert batch(doc) == [
        section_start("code"),
        line_completed("code", "int x;", None),
        parse_warning("unterminated section 'code'", "code"),
        section_end("code"),
        section_start("answer"),
        text_delta("answer", "drifted"),
        section_end("answer"),
    ]


def test_stray_end_token_degrades_to_unstructured():
    doc = "// [code-end]\n"
    assert batch(doc) == [
        parse_warning("unexpected end marker '// [code-end]'"),
        parse_warning("unstructured content outside any section"),
        section_start(UNSTRUCTURED_SECTION),
        text_delta(UNSTRUCTURED_SECTION, "// [code-end]\n"),
        section_end(UNSTRUCTURED_SECTION),
    ]


def test_marker_without_newline_at_eof():
    assert batch("// [answer]: no trailing newline") == [
        section_start("answer"),
        text_delta("answer", "no trailing newline"),
        section_end("answer"),
    ]


def test_empty_feed_no_events():
    parser = StreamParser(G)
    assert parser.feed("") == []


def test_finalize_idempotent():
    parser = StreamParser(G)
    parser.feed("// [answer]: hi\n")
    first = parser.finalize()
    assert parser.finalize() == []
    assert first == []


def test_feed_after_finalize_rejected():
    parser = StreamParser(G)
    parser.finalize()
    with pytest.raises(ParserFinalized):
        parser.feed("x")


def test_well_formed_stream_has_no_warnings():
    doc = (
        "// [answer]: short answer\n"
        "// [code-start]\nint main(void) {\nreturn 0;\n}\n// [code-end]\n"
        "// [relevant-functions]: printf, malloc\n"
    )
    assert not [e for e in batch(doc) if e.kind == "parse_warning"]


def test_unexpected_section_warning_with_expected_list():
    events = batch("// [changes]: something\n", expected=["answer"])
    assert events[0] == parse_warning("unexpected section 'changes'", "changes")


def test_expected_sections_empty_is_free_order():
    events = batch("// [changes]: something\n", expected=[])
    assert events[0].kind == "section_start"


def test_ambiguous_marker_prefix_is_buffered():
    parser = StreamParser(G)
    assert parser.feed("// [an") == []
    events = parser.feed("swer]: done\n")
    events = coalesce_deltas(events)
    assert events == [
        section_start("answer"),
        text_delta("answer", "done"),
        section_end("answer"),
    ]


def test_grammar_rejects_duplicates_and_prefixes():
    with pytest.raises(AmbiguousGrammar):
        MarkupGrammar(
            single_line_sections={"a": "// [x]:", "b": "// [x]:"},
            block_sections={},
        )
    with pytest.raises(AmbiguousGrammar):
        MarkupGrammar(
            single_line_sections={"a": "// [x]:", "b": "// [x]:y"},
            block_sections={},
        )
    with pytest.raises(AmbiguousGrammar):
        MarkupGrammar(single_line_sections={"a": "///"}, block_sections={})


# --- properties ---

DOCS = [
    "// [answer]: plain one-liner\n",
    "// [answer]: has `kw` and trailing text",
    "free text\nmore text\n// [answer]: a\n// [code-start]\nx\ny /// expl\n// [code-end]\n",
    "// [pseudocode-start]\nread n /// input\n  loop i up to n /// visits all\n// [pseudocode-end]\n// [relevant-functions]: scanf\n",
    "// [code-start]\nunterminated\n",
    "// [code-end]\nstray end\n",
    "// [answer]:\n// [answer]: second\n",
    "junk // [answer]: not-at-line-start\n// [changes]: c\n",
    "// [explanations-start]\n[0] /// first\n[1] /// second\n// [explanations-end]\n",
    "//almost marker\n// [answermiss]: x\n// [answer]: real\n",
]


def every_single_split_matches_batch(doc):
    want = batch(doc)
    for cut in range(1, len(doc)):
        assert chunked(doc, [cut]) == want, f"diverged at cut {cut}"


@pytest.mark.parametrize("doc", DOCS)
def test_single_split_invariance(doc):
    every_single_split_matches_batch(doc)


@pytest.mark.parametrize("doc", DOCS)
def test_random_multi_split_invariance(doc):
    rng = random.Random(42)
    want = batch(doc)
    for _ in range(100):
        k = rng.randint(0, min(8, len(doc) - 1))
        cuts = sorted(rng.sample(range(1, len(doc)), k))
        assert chunked(doc, cuts) == want


@given(st.text(alphabet="ax/[]:-ne \n`", max_size=120), st.data())
@settings(max_examples=300)
def test_fuzz_total_and_invariant(text, data):
    # never raises, all sections closed, chunking agrees with batch
    want = batch(text)
    starts = [e.section for e in want if e.kind == "section_start"]
    ends = [e.section for e in want if e.kind == "section_end"]
    assert starts == ends  # single-owner bracketing, no nesting in this grammar
    if len(text) > 1:
        cut = data.draw(st.integers(min_value=1, max_value=len(text) - 1))
        assert chunked(text, [cut]) == want


def _content_oracle(doc):
    """Independent batch classifier: expected content bytes of a document."""
    g = G
    out = []
    in_block = None
    lines = doc.split("\n")
    for i, raw in enumerate(lines):
        has_nl = i < len(lines) - 1
        if raw == "" and not has_nl:
            continue
        if in_block is not None:
            stripped = raw.rstrip(" \t")
            if stripped == g.end_token(in_block):
                in_block = None
                continue
            markerish = any(
                raw.startswith(m) if kind == "single" else stripped == m
                for m, kind, _ in g.markers
            )
            if markerish:
                in_block = None
            else:
                idx = raw.find(g.line_explanation_separator)
                if idx == -1:
                    out.append(raw)
                else:
                    out.append(raw[:idx].rstrip(" \t"))
                    out.append(raw[idx + len(g.line_explanation_separator):].lstrip(" \t"))
                continue
        matched = None
        for marker, kind, sec in g.markers:
            if kind == "single" and raw.startswith(marker):
                matched = ("single", marker)
                break
            if kind in ("begin", "end") and raw.rstrip(" \t") == marker:
                matched = (kind, marker, sec)
                break
        if matched is None:
            out.append(raw + ("\n" if has_nl else ""))
            continue
        if matched[0] == "single":
            rest = raw[len(matched[1]):]
            if rest.startswith(" "):
                rest = rest[1:]
            out.append(rest)
        elif matched[0] == "begin":
            in_block = matched[2]
        else:  # stray end token -> content
            out.append(raw + ("\n" if has_nl else ""))
    return "".join(out)


@pytest.mark.parametrize("doc", DOCS)
def test_reconstruction_property(doc):
    events = batch(doc)
    got = "".join(
        (e.text or "") if e.kind == "text_delta"
        else (e.visible or "") + (e.explanation or "")
        if e.kind == "line_completed" else ""
        for e in events
    )
    assert got == _content_oracle(doc)


def test_prefix_monotonicity():
    doc = DOCS[3]
    for n in range(1, len(doc)):
        parser = StreamParser(G)
        before = coalesce_deltas(parser.feed(doc[:n]))
        after = coalesce_deltas(parser.feed(doc[n:]) + parser.finalize())
        full = batch(doc)
        # events already emitted must be a prefix of the full trace,
        # modulo the last delta still growing
        merged = coalesce_deltas(before + after)
        assert merged == full
        if before:
            head = full[: len(before) - 1]
            assert before[:-1] == head
            last = before[-1]
            matching = full[len(before) - 1]
            if last.kind == "text_delta":
                assert matching.kind == "text_delta"
                assert matching.text.startswith(last.text)
            else:
                assert last == matching
