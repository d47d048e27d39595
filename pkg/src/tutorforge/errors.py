"""Exception taxonomy shared across the platform.

Provider errors wrap transport/LLM failures, prompt errors cover
template misuse, and service errors map one-to-one onto API error
responses.
"""

from __future__ import annotations


class TutorForgeError(Exception):
    """Base class for all library errors."""


# --- provider / gateway ---

class ProviderError(TutorForgeError):
    pass


class ProviderUnreachable(ProviderError):
    """Network-level failure before or while talking to the provider."""


class ProviderRefused(ProviderError):
    """Provider answered with a non-2xx status; body preserved."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"provider refused with status {status}")
        self.status = status
        self.body = body


class StreamAborted(ProviderError):
    """Stream ended abnormally (consumer cancelled or connection dropped).

    ``partial_text`` holds whatever had been received before the abort.
    """

    def __init__(self, reason: str, partial_text: str = ""):
        super().__init__(reason)
        self.partial_text = partial_text


class MalformedProviderResponse(ProviderError):
    pass


class UnknownPrompt(ProviderError):
    """Scripted provider has no entry for the exact prompt text."""


class InvalidScriptTable(TutorForgeError):
    pass


# --- prompt library ---

class PromptError(TutorForgeError):
    pass


class MissingSlot(PromptError):
    def __init__(self, slot: str):
        super().__init__(f"required input '{slot}' is missing or empty")
        self.slot = slot


class SlotTooLong(PromptError):
    def __init__(self, slot: str, limit: str):
        super().__init__(f"input '{slot}' exceeds the limit of {limit}")
        self.slot = slot


class NoLabels(PromptError):
    """Annotation-explanation prompt requested for an empty label set."""


class TemplateError(PromptError):
    pass


# --- stream markup ---

class AmbiguousGrammar(TutorForgeError):
    pass


class ParserFinalized(TutorForgeError):
    """feed() called after finalize()."""


# --- fix pipeline ---

class GuardrailViolation(TutorForgeError):
    """Serialized fix response leaked a line of the generated fixed code."""

    def __init__(self, leaked_lines: list[str]):
        super().__init__(f"guardrail violation: {len(leaked_lines)} fixed-code line(s) leaked")
        self.leaked_lines = leaked_lines


class EmptyTransform(TutorForgeError):
    """Chained LLM call produced nothing usable."""


# --- doc store ---

class CorpusParseError(TutorForgeError):
    def __init__(self, path: str, detail: str, line: int | None = None):
        at = f"{path}:{line}" if line is not None else path
        super().__init__(f"{at}: {detail}")
        self.path = path
        self.line = line


class DuplicateFunctionName(TutorForgeError):
    def __init__(self, name: str):
        super().__init__(f"duplicate doc entry for function '{name}'")
        self.name = name


# --- tutor service ---

class ServiceError(TutorForgeError):
    pass


class AuthFailed(ServiceError):
    pass


class Forbidden(ServiceError):
    pass


class RatingRequired(ServiceError):
    def __init__(self, response_id: str):
        super().__init__("previous response must be rated before submitting a new query")
        self.response_id = response_id


class InvalidInputCombination(ServiceError):
    pass


class InputTooLong(ServiceError):
    pass


class Throttled(ServiceError):
    def __init__(self, retry_after: float):
        super().__init__(f"usage limit reached; retry in {retry_after:.0f}s")
        self.retry_after = retry_after


class UnknownResponse(ServiceError):
    pass


class AlreadyRated(ServiceError):
    pass


class StarsOutOfRange(ServiceError):
    pass


class FollowUpUnsupported(ServiceError):
    pass


# --- analytics ---

class AnalyticsError(TutorForgeError):
    pass


class DenominatorZero(AnalyticsError):
    pass


class LengthMismatch(AnalyticsError):
    pass
