"""Uniform text-completion gateway.

All LLM traffic goes through :class:`CompletionStream` (or the
sink-style ``complete`` wrapper): the gateway scans for stop tokens
across chunk boundaries (returned text never contains one) and enforces
the output-length bound, so every provider behaves identically from the
caller's point of view.

Providers are thin: they expose ``stream(request)`` yielding raw text
fragments and may return a native finish reason from the generator.
The deterministic scripted provider is the workhorse for tests and for
``replay``; the OpenAI-compatible HTTP client lives in
:mod:`tutorforge.openai_client`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Protocol

from .errors import InvalidScriptTable, StreamAborted, UnknownPrompt

logger = logging.getLogger(__name__)

# Meanings of CompletionResult.finish:
#   "stop"   - a configured stop token was reached (token consumed)
#   "length" - output bound hit (by us or by the provider)
#   "end"    - provider exhausted its output without a stop token
FINISH_STOP = "stop"
FINISH_LENGTH = "length"
FINISH_END = "end"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    stop_tokens: tuple[str, ...] = ()
    max_output_tokens: int | None = None
    temperature: float = 0.0

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not self.stop_tokens and self.max_output_tokens is None:
            raise ValueError("need at least one stop token or a max_output_tokens bound")
        if self.max_output_tokens is not None and self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if any(t == "" for t in self.stop_tokens):
            raise ValueError("stop tokens must be non-empty")


@dataclass(frozen=True)
class CompletionChunk:
    text: str
    is_final: bool = False


@dataclass(frozen=True)
class CompletionResult:
    text: str
    finish: str


class Provider(Protocol):
    """Anything that can stream raw completion text for a request."""

    name: str

    def stream(self, request: CompletionRequest) -> Iterator[str]:
        """Yield raw text fragments; may ``return`` a native finish reason."""
        ...


class _StopScanner:
    """Incremental stop-token scanner.

    Holds back the longest suffix of seen text that is a proper prefix
    of some stop token, so a token split across chunks is still caught
    and partial matches are never emitted prematurely. On multiple
    matches the earliest wins; at equal offsets the longest token wins.
    """

    def __init__(self, stop_tokens: tuple[str, ...]):
        self.tokens = stop_tokens
        self.pending = ""
        self.hit = False

    def push(self, fragment: str) -> str:
        if self.hit:
            return ""
        self.pending += fragment
        best: tuple[int, int] | None = None
        for tok in self.tokens:
            i = self.pending.find(tok)
            if i != -1:
                key = (i, -len(tok))
                if best is None or key < best:
                    best = key
        if best is not None:
            self.hit = True
            out = self.pending[: best[0]]
            self.pending = ""
            return out
        # emit everything except a suffix that could still become a token
        hold = 0
        for tok in self.tokens:
            for k in range(min(len(tok) - 1, len(self.pending)), 0, -1):
                if self.pending.endswith(tok[:k]):
                    hold = max(hold, k)
                    break
        if hold:
            out = self.pending[:-hold]
            self.pending = self.pending[-hold:]
        else:
            out = self.pending
            self.pending = ""
        return out

    def flush(self) -> str:
        out = "" if self.hit else self.pending
        self.pending = ""
        return out


class _WordBudget:
    """Counts whitespace-delimited words across fragment boundaries.

    The gateway has no tokenizer, so "output tokens" are approximated as
    words when a provider cannot enforce the bound natively. ``clip``
    returns the admissible prefix of a fragment and whether the budget
    ran out.
    """

    def __init__(self, limit: int | None):
        self.limit = limit
        self.count = 0
        self._in_word = False

    def clip(self, fragment: str) -> tuple[str, bool]:
        if self.limit is None:
            return fragment, False
        for i, ch in enumerate(fragment):
            if ch.isspace():
                self._in_word = False
            elif not self._in_word:
                self._in_word = True
                self.count += 1
                if self.count > self.limit:
                    return fragment[:i], True
        return fragment, False


class CompletionStream:
    """Iterator of clean :class:`CompletionChunk` values for one request.

    Exactly one chunk has ``is_final`` set (possibly empty text); after
    it, ``finish`` and ``text`` are populated. The concatenation of all
    chunk texts equals ``text``.
    """

    def __init__(self, provider: Provider, request: CompletionRequest):
        self.request = request
        self.finish: str | None = None
        self._parts: list[str] = []
        self._scanner = _StopScanner(request.stop_tokens)
        self._budget = _WordBudget(request.max_output_tokens)
        self._gen = provider.stream(request)
        self._done = False

    @property
    def text(self) -> str:
        return "".join(self._parts)

    def __iter__(self) -> "CompletionStream":
        return self

    def __next__(self) -> CompletionChunk:
        if self._done:
            raise StopIteration
        while True:
            try:
                fragment = next(self._gen)
            except StopIteration as ended:
                return self._finish_up(native=ended.value)
            except StreamAborted as err:
                self._done = True
                raise StreamAborted(str(err), partial_text=self.text + err.partial_text) from err
            out = self._scanner.push(fragment)
            out, exhausted = self._budget.clip(out)
            if self._scanner.hit or exhausted:
                self._gen.close()
                self._done = True
                # a budget cut lands before any stop token it truncated away
                self.finish = FINISH_LENGTH if exhausted else FINISH_STOP
                self._parts.append(out)
                return CompletionChunk(out, is_final=True)
            if out:
                self._parts.append(out)
                return CompletionChunk(out)

    def _finish_up(self, native: str | None) -> CompletionChunk:
        self._done = True
        tail = self._scanner.flush()
        tail, exhausted = self._budget.clip(tail)
        self._parts.append(tail)
        if exhausted or native == FINISH_LENGTH:
            self.finish = FINISH_LENGTH
        elif native == FINISH_STOP:
            self.finish = FINISH_STOP
        else:
            self.finish = FINISH_END
        return CompletionChunk(tail, is_final=True)

    def close(self) -> None:
        self._done = True
        self._gen.close()


def complete(
    provider: Provider,
    request: CompletionRequest,
    sink: Callable[[CompletionChunk], None],
) -> CompletionResult:
    """Run a completion, pushing chunks to ``sink`` as they arrive.

    Returns the full text (identical to the concatenated chunk texts)
    and the finish reason. A sink that raises cancels the stream: the
    partial text is preserved in the resulting :class:`StreamAborted`.
    """
    stream = CompletionStream(provider, request)
    for chunk in stream:
        try:
            sink(chunk)
        except Exception as err:
            stream.close()
            raise StreamAborted(f"sink cancelled the stream: {err}",
                                partial_text=stream.text) from err
    return CompletionResult(text=stream.text, finish=stream.finish or FINISH_END)


# --- scripted provider ---


@dataclass(frozen=True)
class ScriptEntry:
    prompt: str
    completion: str
    splits: tuple[int, ...] = ()

    def __post_init__(self):
        prev = 0
        for off in self.splits:
            if not prev < off < len(self.completion):
                raise InvalidScriptTable(
                    f"split offsets must be strictly increasing and inside the text, got {self.splits!r}"
                )
            prev = off

    def chunks(self) -> list[str]:
        bounds = [0, *self.splits, len(self.completion)]
        return [self.completion[a:b] for a, b in zip(bounds, bounds[1:])]


@dataclass(frozen=True)
class ScriptTable:
    entries: dict[str, ScriptEntry] = field(default_factory=dict)

    @classmethod
    def from_entries(cls, entries: list[ScriptEntry]) -> "ScriptTable":
        table: dict[str, ScriptEntry] = {}
        for e in entries:
            if e.prompt in table:
                raise InvalidScriptTable(f"duplicate script entry for prompt {e.prompt[:60]!r}")
            table[e.prompt] = e
        return cls(table)


def load_script_table(path: str | Path) -> ScriptTable:
    """Load a script table from a JSON file: ``[{prompt, completion, splits}]``."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, list):
        raise InvalidScriptTable("script file must hold a JSON array")
    entries = []
    for i, item in enumerate(raw):
        try:
            entries.append(ScriptEntry(
                prompt=item["prompt"],
                completion=item["completion"],
                splits=tuple(item.get("splits", ())),
            ))
        except (KeyError, TypeError) as err:
            raise InvalidScriptTable(f"entry {i}: {err}") from err
    return ScriptTable.from_entries(entries)


class ScriptedProvider:
    """Deterministic provider replaying pre-recorded completions.

    Prompt lookup is by exact text, so a mismatch surfaces the full
    prompt in the error instead of a silent wrong answer.
    """

    def __init__(self, table: ScriptTable):
        self.table = table
        self.name = "scripted"

    def stream(self, request: CompletionRequest) -> Iterator[str]:
        entry = self.table.entries.get(request.prompt)
        if entry is None:
            raise UnknownPrompt(
                f"no scripted completion for prompt ({len(request.prompt)} chars): "
                f"{request.prompt[:200]!r}..."
            )
        yield from entry.chunks()
        return None
