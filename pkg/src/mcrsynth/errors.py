"""Exception hierarchy shared across the package."""

from __future__ import annotations


class McrError(Exception):
    """Base class for every error raised by this package."""


# gateway ---------------------------------------------------------------


class InvalidRequest(McrError, ValueError):
    """A chat request violates its own invariants and never reaches a provider."""


class ProviderError(McrError):
    """Base class for provider-side failures."""


class AuthError(ProviderError):
    pass


class TransientProviderError(ProviderError):
    """Failure that is worth retrying (timeouts, 5xx)."""


class RateLimited(TransientProviderError):
    pass


class MalformedResponse(ProviderError):
    pass


class ImageLoadError(ProviderError):
    pass


class StructuredOutputError(McrError):
    def __init__(self, tag: str, reason: str, last_text: str = "") -> None:
        super().__init__(f"[{tag}] structured output rejected: {reason}")
        self.tag = tag
        self.reason = reason
        self.last_text = last_text


# catalog ---------------------------------------------------------------


class ParseError(McrError):
    pass


class EmptyCatalog(McrError):
    pass


class SummaryEmpty(McrError):
    pass


class DimensionMismatch(McrError):
    pass


class EmptyStore(McrError):
    pass


class RerankHallucination(McrError):
    pass


# profile generation ------------------------------------------------------


class ExpansionStalled(McrError):
    pass


class DedupExhausted(McrError):
    pass


# simulation --------------------------------------------------------------


class AllCandidatesRejected(McrError):
    pass


# evaluation --------------------------------------------------------------


class EmptyCorpus(McrError, ValueError):
    pass


class EmptyReference(McrError, ValueError):
    pass


class EmptyInput(McrError, ValueError):
    pass


class EmptyRecords(McrError, ValueError):
    pass


# pipeline ----------------------------------------------------------------


class ConfigError(McrError):
    pass


class StageFailure(McrError):
    def __init__(self, stage: str, detail: str) -> None:
        super().__init__(f"stage {stage!r} failed: {detail}")
        self.stage = stage
        self.detail = detail
