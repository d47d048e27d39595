"""Feature dispatch, rating gate, throttling, and persistence.

One engine instance serves many sessions. Per-session operations are
serialized by the session lock, which the streaming handle holds until
its stream finishes, so the rating gate can never observe a half-done
generation.
"""

from __future__ import annotations

import logging
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Generator, Iterator

from ..analytics import daily_series, feature_usage_stats, pseudonymize
from ..errors import (
    AuthFailed,
    AlreadyRated,
    Forbidden,
    FollowUpUnsupported,
    InputTooLong,
    InvalidInputCombination,
    ProviderError,
    ProviderUnreachable,
    RatingRequired,
    StarsOutOfRange,
    StreamAborted,
    Throttled,
    UnknownPrompt,
    UnknownResponse,
)
from ..fixer import stream_fix_pipeline
from ..gateway import (
    CompletionRequest,
    CompletionStream,
    FINISH_LENGTH,
    Provider,
)
from ..markup import (
    MarkupGrammar,
    StreamEvent,
    StreamParser,
    default_grammar,
    line_completed,
    parse_warning,
    progress_line_count,
    section_end,
    section_start,
    text_delta,
)
from ..prompts import (
    DEFAULT_LIMITS,
    FeatureKind,
    InlineKind,
    InputLimits,
    PromptLibrary,
    build_feature_prompt,
    build_followup_suggestion_prompt,
    flatten_exchange,
)
from ..scaffold import (
    DocStore,
    GENERIC_LINE_EXPLANATION,
    bundled_docstore,
    stream_pseudocode,
)
from ..errors import EmptyTransform
from .models import (
    FINISH_COMPLETE,
    FINISH_REFUSED,
    FINISH_TRUNCATED,
    Query,
    RatingRecord,
    ResponseDocument,
    Role,
    Session,
)
from .render import document_from_events
from .store import RecordLog
from .throttle import TokenBucket

logger = logging.getLogger(__name__)

MAX_SUGGESTIONS = 3

# inputs each feature requires/rejects, over the two wire fields; for
# help-fix-code the question box carries the intended behaviour
_SERVICE_MATRIX: dict[FeatureKind, tuple[frozenset, frozenset]] = {
    FeatureKind.GENERAL_QUESTION: (frozenset({"question"}), frozenset({"code"})),
    FeatureKind.QUESTION_FROM_CODE: (frozenset({"question", "code"}), frozenset()),
    FeatureKind.EXPLAIN_CODE: (frozenset({"code"}), frozenset({"question"})),
    FeatureKind.HELP_FIX_CODE: (frozenset({"question", "code"}), frozenset()),
    FeatureKind.HELP_WRITE_CODE: (frozenset({"question"}), frozenset({"code"})),
    FeatureKind.INLINE_EXPLORATION: (frozenset({"question"}), frozenset({"code"})),
    FeatureKind.FOLLOW_UP: (frozenset({"question"}), frozenset({"code"})),
}

# features whose responses may be followed up on (and therefore get
# suggested follow-ups); help-fix-code and inline exploration do not
FOLLOWUP_PARENTS = frozenset({
    FeatureKind.GENERAL_QUESTION,
    FeatureKind.QUESTION_FROM_CODE,
    FeatureKind.EXPLAIN_CODE,
    FeatureKind.HELP_WRITE_CODE,
    FeatureKind.FOLLOW_UP,
})

_INLINE_PHRASES = {
    InlineKind.EXAMPLE_CODE: "show an example use of",
    InlineKind.DOCUMENTATION: "documentation for",
}


@dataclass
class EngineConfig:
    temperature: float = 0.0
    max_output_tokens: int = 1200
    throttle_capacity: int = 10
    throttle_refill_per_hour: float = 10.0
    suggestions_enabled: bool = True
    version_tag: str = "v2"
    limits: InputLimits = field(default_factory=lambda: DEFAULT_LIMITS)


def sequential_ids(start: int = 1) -> Callable[[], str]:
    counter = {"n": start - 1}

    def factory() -> str:
        counter["n"] += 1
        return f"{counter['n']:04d}"

    return factory


def _uuid_ids() -> str:
    return uuid.uuid4().hex[:12]


class StreamHandle:
    """Iterator over a response's events; owns the session lock.

    ``document`` is set once the stream completes; abandoned handles
    must be ``close()``d (or used as a context manager) to release the
    session.
    """

    def __init__(self, gen: Generator[StreamEvent, None, None],
                 on_finish: Callable[[], None], result: dict | None = None):
        self._gen = gen
        self._on_finish = on_finish
        self._finished = False
        self._result = result if result is not None else {}

    @property
    def document(self) -> ResponseDocument | None:
        return self._result.get("document")

    def __iter__(self) -> Iterator[StreamEvent]:
        return self

    def __next__(self) -> StreamEvent:
        try:
            return next(self._gen)
        except StopIteration:
            self._finish()
            raise
        except BaseException:
            self._finish()
            raise

    def __enter__(self) -> "StreamHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if not self._finished:
            self._gen.close()
            self._finish()

    def _finish(self) -> None:
        if not self._finished:
            self._finished = True
            self._on_finish()


class TutorEngine:
    def __init__(
        self,
        provider: Provider,
        store: RecordLog,
        *,
        library: PromptLibrary | None = None,
        grammar: MarkupGrammar | None = None,
        docstore: DocStore | None = None,
        config: EngineConfig | None = None,
        clock: Callable[[], float] = time.time,
        monotonic: Callable[[], float] = time.monotonic,
        id_factory: Callable[[], str] | None = None,
    ):
        self.provider = provider
        self.store = store
        self.library = library or PromptLibrary.bundled()
        self.grammar = grammar or default_grammar()
        self.docstore = docstore if docstore is not None else bundled_docstore()
        self.config = config or EngineConfig()
        self._clock = clock
        self._monotonic = monotonic
        self._ids = id_factory or _uuid_ids
        self.sessions: dict[str, Session] = {}
        self._documents: dict[str, ResponseDocument] = {}
        self._response_meta: dict[str, dict] = {}
        self._load_history()

    # -- sessions --

    def open_session(self, user_id: str, role: Role = Role.STUDENT) -> Session:
        session = Session(
            user_id=user_id,
            role=role,
            token=uuid.uuid4().hex,
            throttle=TokenBucket(
                capacity=self.config.throttle_capacity,
                refill_per_hour=self.config.throttle_refill_per_hour,
                clock=self._monotonic,
            ),
        )
        self.sessions[session.token] = session
        return session

    def authenticate(self, token: str) -> Session:
        session = self.sessions.get(token)
        if session is None:
            raise AuthFailed("unknown or expired session token")
        return session

    # -- queries --

    def submit_query(
        self,
        session: Session,
        feature: FeatureKind,
        question: str | None = None,
        code: str | None = None,
        inline_kind: InlineKind | None = None,
    ) -> StreamHandle:
        if feature == FeatureKind.FOLLOW_UP:
            raise InvalidInputCombination("follow-ups go through submit_followup")
        return self._submit(session, feature, question, code, inline_kind, None)

    def submit_followup(
        self,
        session: Session,
        parent_response_id: str,
        question: str | None,
    ) -> StreamHandle:
        parent = self._documents.get(parent_response_id)
        meta = self._response_meta.get(parent_response_id)
        if parent is None or meta is None or (
            meta["user"] != session.user_id and session.role != Role.ADMIN
        ):
            raise UnknownResponse(f"no response {parent_response_id!r} in this session")
        if parent.query.feature not in FOLLOWUP_PARENTS:
            raise FollowUpUnsupported(
                f"{parent.query.feature.value} responses do not accept follow-ups")
        return self._submit(session, FeatureKind.FOLLOW_UP, question, None, None,
                            parent_response_id)

    def _submit(
        self,
        session: Session,
        feature: FeatureKind,
        question: str | None,
        code: str | None,
        inline_kind: InlineKind | None,
        parent_response: str | None,
    ) -> StreamHandle:
        session.lock.acquire()
        try:
            self._validate_inputs(feature, question, code)
            if session.pending_rating is not None:
                raise RatingRequired(session.pending_rating)
            if session.role != Role.ADMIN:
                retry_after = session.throttle.try_consume()
                if retry_after is not None:
                    raise Throttled(retry_after)
            query = Query(
                id=f"q-{self._ids()}",
                user_id=session.user_id,
                feature=feature,
                created_at=self._now(),
                question=question,
                code=code,
                parent_response=parent_response,
                inline_kind=inline_kind,
            )
        except BaseException:
            session.lock.release()
            raise
        result: dict = {}
        return StreamHandle(self._generate(session, query, result),
                            session.lock.release, result)

    def _validate_inputs(self, feature: FeatureKind, question: str | None,
                         code: str | None) -> None:
        required, forbidden = _SERVICE_MATRIX[feature]
        provided = {"question": question, "code": code}
        for slot in sorted(required):
            if not provided[slot]:
                raise InvalidInputCombination(
                    f"{feature.value} requires the {slot} input")
        for slot in sorted(forbidden):
            if provided[slot]:
                raise InvalidInputCombination(
                    f"{feature.value} does not accept the {slot} input")
        limits = self.config.limits
        if question and len(question) > limits.max_question_chars:
            raise InputTooLong(
                f"question exceeds {limits.max_question_chars} characters")
        if code and code.count("\n") + 1 > limits.max_code_lines:
            raise InputTooLong(f"code exceeds {limits.max_code_lines} lines")

    def _now(self) -> str:
        return datetime.fromtimestamp(self._clock(), tz=timezone.utc).isoformat()

    # -- generation --

    def _generate(self, session: Session, query: Query,
                  result: dict) -> Generator[StreamEvent, None, None]:
        events: list[StreamEvent] = []
        response_id = "r-" + query.id[2:]

        def run() -> Generator[StreamEvent, None, str]:
            ctx: dict = {}
            yield from self._run_feature(query, ctx)
            finish = ctx["finish"]
            if (
                self.config.suggestions_enabled
                and query.feature in FOLLOWUP_PARENTS
                and finish != FINISH_REFUSED
            ):
                partial = document_from_events(events, query, response_id, finish)
                yield from self._stream_suggestions(partial)
            return finish

        try:
            gen = run()
            finish = None
            retried = False
            while True:
                try:
                    ev = next(gen)
                except StopIteration as done:
                    finish = done.value
                    break
                except (ProviderUnreachable, StreamAborted):
                    if events or retried:
                        raise
                    # transport failed before any output: one retry
                    retried = True
                    gen = run()
                    continue
                events.append(ev)
                yield ev
        except Exception as err:
            self.store.append_error(query, type(err).__name__, str(err),
                                    self.config.version_tag)
            logger.error("generation failed for %s: %s", query.id, err)
            raise
        doc = document_from_events(events, query, response_id, finish)
        self.store.append_usage(query, doc, self.config.version_tag)
        self._documents[doc.id] = doc
        self._response_meta[doc.id] = {"user": session.user_id, "rated": False}
        session.pending_rating = doc.id
        result["document"] = doc

    def _run_feature(self, query: Query, ctx: dict) -> Generator[StreamEvent, None, None]:
        cfg = self.config
        if query.feature == FeatureKind.HELP_FIX_CODE:
            fix = yield from stream_fix_pipeline(
                query.code, query.question, self.provider,
                library=self.library, grammar=self.grammar, limits=cfg.limits,
                max_output_tokens=cfg.max_output_tokens, temperature=cfg.temperature,
            )
            if fix.refused is not None:
                ctx["finish"] = FINISH_REFUSED
                return
            yield from self._emit_known_functions(fix.relevant_functions)
            ctx["finish"] = FINISH_COMPLETE
            return

        prompt = build_feature_prompt(
            self.library, query.feature,
            question=self._effective_question(query),
            code=query.code,
            prior_exchange=self._prior_exchange(query),
            limits=cfg.limits,
        )
        request = CompletionRequest(
            prompt.rendered,
            stop_tokens=prompt.stop_tokens,
            max_output_tokens=cfg.max_output_tokens,
            temperature=cfg.temperature,
        )
        parser = StreamParser(self.grammar, list(prompt.expected_sections))
        code_lines: list[str] = []
        functions_text: list[str] = []
        refused = False

        def handle(ev: StreamEvent) -> list[StreamEvent]:
            nonlocal refused
            if ev.section == "code":
                if ev.kind == "line_completed":
                    code_lines.append(ev.visible)
                    return [progress_line_count(len(code_lines))]
                return []
            if ev.section == "relevant-functions":
                if ev.kind == "text_delta":
                    functions_text.append(ev.text)
                return []
            if ev.section == "off-topic":
                refused = True
                return [ev]
            if ev.section == "explained-code" and ev.kind == "line_completed":
                if not (ev.explanation or "").strip() and ev.visible.strip():
                    return [
                        parse_warning("explained line missing explanation",
                                      "explained-code"),
                        line_completed("explained-code", ev.visible,
                                       GENERIC_LINE_EXPLANATION),
                    ]
            return [ev]

        stream = CompletionStream(self.provider, request)
        for chunk in stream:
            for ev in parser.feed(chunk.text):
                yield from handle(ev)
        for ev in parser.finalize():
            yield from handle(ev)

        if refused:
            ctx["finish"] = FINISH_REFUSED
            return

        if code_lines:
            try:
                yield from stream_pseudocode(
                    "\n".join(code_lines), self.provider,
                    library=self.library, grammar=self.grammar, limits=cfg.limits,
                    max_output_tokens=cfg.max_output_tokens,
                    temperature=cfg.temperature,
                )
            except (EmptyTransform, UnknownPrompt) as err:
                logger.warning("pseudo-code chain skipped for %s: %s", query.id, err)
                yield parse_warning("pseudo-code transform unavailable")

        names = [n.strip() for n in "".join(functions_text).split(",") if n.strip()]
        yield from self._emit_known_functions(names)
        ctx["finish"] = (FINISH_TRUNCATED if stream.finish == FINISH_LENGTH
                         else FINISH_COMPLETE)

    def _emit_known_functions(self, names: list[str]) -> Generator[StreamEvent, None, None]:
        known: list[str] = []
        for name in names:
            if name in self.docstore and name not in known:
                known.append(name)
        if known:
            yield section_start("relevant-functions")
            yield text_delta("relevant-functions", ", ".join(known))
            yield section_end("relevant-functions")

    def _stream_suggestions(self, partial: ResponseDocument) -> Generator[StreamEvent, None, None]:
        # buffered, not streamed: the call is tiny, trails the response,
        # and buffering keeps the wire clean if the provider fails here
        cfg = self.config
        try:
            prompt = build_followup_suggestion_prompt(self.library, partial, cfg.limits)
            request = CompletionRequest(
                prompt.rendered,
                stop_tokens=prompt.stop_tokens,
                max_output_tokens=cfg.max_output_tokens,
                temperature=cfg.temperature,
            )
            parser = StreamParser(self.grammar, list(prompt.expected_sections))
            parsed: list[StreamEvent] = []
            for chunk in CompletionStream(self.provider, request):
                parsed.extend(parser.feed(chunk.text))
            parsed.extend(parser.finalize())
        except (UnknownPrompt, ProviderError) as err:
            logger.warning("follow-up suggestions skipped: %s", err)
            yield parse_warning("follow-up suggestions unavailable")
            return
        collected = [
            ev.visible.strip() for ev in parsed
            if ev.kind == "line_completed" and ev.section == "followups"
            and ev.visible.strip()
        ]
        overflow = len(collected) > MAX_SUGGESTIONS
        yield section_start("followups")
        if overflow:
            yield parse_warning(f"follow-up suggestions truncated at {MAX_SUGGESTIONS}")
        for question in collected[:MAX_SUGGESTIONS]:
            yield line_completed("followups", question)
        yield section_end("followups")

    def _effective_question(self, query: Query) -> str | None:
        if query.feature == FeatureKind.INLINE_EXPLORATION and query.inline_kind:
            phrase = _INLINE_PHRASES.get(query.inline_kind)
            if phrase:
                return f"{phrase} `{query.question}`"
        return query.question

    def _prior_exchange(self, query: Query) -> str | None:
        if query.parent_response is None:
            return None
        parent = self._documents[query.parent_response]
        return flatten_exchange(parent)

    # -- ratings --

    def rate_response(self, session: Session, response_id: str, stars: int,
                      reason: str = "") -> None:
        with session.lock:
            meta = self._response_meta.get(response_id)
            if meta is None or (meta["user"] != session.user_id
                                and session.role != Role.ADMIN):
                raise UnknownResponse(f"no response {response_id!r} in this session")
            if not isinstance(stars, int) or not 1 <= stars <= 5:
                raise StarsOutOfRange("stars must be an integer from 1 to 5")
            if meta["rated"]:
                raise AlreadyRated(f"response {response_id!r} is already rated")
            rating = RatingRecord(response_id, stars, reason or "", self._now())
            self.store.append_rating(rating)
            meta["rated"] = True
            if session.pending_rating == response_id:
                session.pending_rating = None

    # -- lookups & admin --

    def get_response(self, session: Session, response_id: str) -> ResponseDocument:
        doc = self._documents.get(response_id)
        meta = self._response_meta.get(response_id)
        if doc is None or meta is None or (
            meta["user"] != session.user_id and session.role != Role.ADMIN
        ):
            raise UnknownResponse(f"no response {response_id!r} in this session")
        return doc

    def admin_stats(self, session: Session, start: str | None = None,
                    end: str | None = None, smoothing_window: int = 7) -> dict:
        if session.role != Role.ADMIN:
            raise Forbidden("admin role required")
        records = self.store.load_usage_records()
        for rec in records:
            rec["query"]["user_id"] = pseudonymize(rec["query"]["user_id"])
        if start or end:
            def in_range(rec):
                date = rec["query"]["created_at"][:10]
                return (start is None or date >= start) and (end is None or date <= end)
            records = [r for r in records if in_range(r)]
        stats = feature_usage_stats(records)
        out = stats.to_dict()
        if records:
            out["daily_series"] = daily_series(records, smoothing_window,
                                               start=start, end=end)
        return out

    # -- init --

    def _load_history(self) -> None:
        for rec in self.store.load_usage_records():
            try:
                doc = ResponseDocument.from_dict(rec["response"])
            except (KeyError, ValueError) as err:
                logger.warning("skipping unreadable stored response: %s", err)
                continue
            self._documents[doc.id] = doc
            self._response_meta[doc.id] = {
                "user": doc.query.user_id,
                "rated": rec.get("rating") is not None,
            }
