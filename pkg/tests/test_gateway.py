import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from tutorforge.errors import InvalidScriptTable, StreamAborted, UnknownPrompt
from tutorforge.gateway import (
    CompletionRequest,
    CompletionStream,
    ScriptEntry,
    ScriptTable,
    ScriptedProvider,
    complete,
    load_script_table,
)


def scripted(*entries):
    return ScriptedProvider(ScriptTable.from_entries(list(entries)))


def collect(provider, request):
    chunks = []
    result = complete(provider, request, chunks.append)
    return chunks, result


def test_scripted_chunking_matches_plan():
    provider = scripted(ScriptEntry("P", "hello", splits=(2,)))
    chunks, result = collect(provider, CompletionRequest("P", max_output_tokens=100))
    texts = [c.text for c in chunks if not c.is_final]
    assert texts == ["he", "llo"]
    assert result.text == "hello"


def test_stop_token_consumed_and_suffix_dropped():
    provider = scripted(ScriptEntry("P", "ans // [end] junk"))
    req = CompletionRequest("P", stop_tokens=("// [end]",))
    chunks, result = collect(provider, req)
    assert result.text == "ans "
    assert result.finish == "stop"
    assert "".join(c.text for c in chunks) == "ans "


def test_stop_token_split_across_chunks():
    text = "abc// [end]xyz"
    provider = scripted(ScriptEntry("P", text, splits=(4, 7)))  # "abc/", "/ [", "end]xyz"
    req = CompletionRequest("P", stop_tokens=("// [end]",))
    _, result = collect(provider, req)
    assert result.text == "abc"


def test_earliest_stop_token_wins_longest_at_tie():
    provider = scripted(ScriptEntry("P", "xxSTOPLONGyy"))
    req = CompletionRequest("P", stop_tokens=("STOPLONG", "STOP"))
    _, result = collect(provider, req)
    assert result.text == "xx"


def test_concatenation_identity_random_scripts():
    rng = random.Random(7)
    for i in range(1000):
        n = rng.randint(1, 60)
        text = "".join(rng.choice("ab cd\nef") for _ in range(n))
        offsets = sorted(rng.sample(range(1, n), min(rng.randint(0, 4), n - 1))) if n > 1 else []
        provider = scripted(ScriptEntry("P", text, splits=tuple(offsets)))
        chunks, result = collect(provider, CompletionRequest("P", max_output_tokens=10_000))
        assert result.text == text
        assert "".join(c.text for c in chunks) == text
        assert sum(1 for c in chunks if c.is_final) == 1


def test_scripted_is_deterministic():
    provider = scripted(ScriptEntry("P", "some text here", splits=(4, 9)))
    req = CompletionRequest("P", max_output_tokens=50)
    first = collect(provider, req)
    second = collect(provider, req)
    assert first == second


def test_three_entries_each_resolved():
    provider = scripted(
        ScriptEntry("a", "A"), ScriptEntry("b", "B"), ScriptEntry("c", "C"),
    )
    for prompt, expect in [("a", "A"), ("b", "B"), ("c", "C")]:
        _, result = collect(provider, CompletionRequest(prompt, max_output_tokens=5))
        assert result.text == expect


def test_unknown_prompt():
    provider = scripted()
    with pytest.raises(UnknownPrompt):
        collect(provider, CompletionRequest("nope", max_output_tokens=5))


def test_word_budget_truncates():
    provider = scripted(ScriptEntry("P", "one two three four five"))
    req = CompletionRequest("P", max_output_tokens=3)
    _, result = collect(provider, req)
    assert result.text == "one two three "
    assert result.finish == "length"


def test_sink_cancellation_preserves_partial_text():
    provider = scripted(ScriptEntry("P", "hello world", splits=(5,)))
    seen = []

    def sink(chunk):
        seen.append(chunk.text)
        if len(seen) == 1:
            raise RuntimeError("client went away")

    with pytest.raises(StreamAborted) as err:
        complete(provider, CompletionRequest("P", max_output_tokens=50), sink)
    assert err.value.partial_text == "hello"


def test_request_validation():
    with pytest.raises(ValueError):
        CompletionRequest("", stop_tokens=("x",))
    with pytest.raises(ValueError):
        CompletionRequest("p")  # no stop token, no bound
    with pytest.raises(ValueError):
        CompletionRequest("p", max_output_tokens=0)
    with pytest.raises(ValueError):
        CompletionRequest("p", stop_tokens=("x",), temperature=3.0)


def test_script_entry_validates_offsets():
    with pytest.raises(InvalidScriptTable):
        ScriptEntry("p", "abc", splits=(0,))
    with pytest.raises(InvalidScriptTable):
        ScriptEntry("p", "abc", splits=(3,))
    with pytest.raises(InvalidScriptTable):
        ScriptEntry("p", "abc", splits=(2, 2))


def test_script_table_rejects_duplicates():
    with pytest.raises(InvalidScriptTable):
        ScriptTable.from_entries([ScriptEntry("p", "a"), ScriptEntry("p", "b")])


def test_load_script_table(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps([
        {"prompt": "p", "completion": "hello", "splits": [2]},
        {"prompt": "q", "completion": "bye"},
    ]))
    table = load_script_table(path)
    assert table.entries["p"].chunks() == ["he", "llo"]
    assert table.entries["q"].chunks() == ["bye"]


@given(st.text(alphabet="ab /[]ension\n", min_size=1, max_size=80),
       st.lists(st.integers(min_value=1), max_size=4))
@settings(max_examples=200)
def test_stream_never_emits_stop_token(text, raw_offsets):
    offsets = sorted({o % len(text) for o in raw_offsets if 0 < o % len(text) < len(text)})
    entry = ScriptEntry("P", text, splits=tuple(offsets))
    provider = scripted(entry)
    req = CompletionRequest("P", stop_tokens=("// [end]", "[[x]]"), max_output_tokens=10_000)
    stream = CompletionStream(provider, req)
    out = "".join(chunk.text for chunk in stream)
    for tok in req.stop_tokens:
        assert tok not in out
    assert out == stream.text
