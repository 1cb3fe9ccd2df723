"""Exception types shared across the package."""


class RefNeedError(Exception):
    """Base class for all package-specific errors."""


class UnknownLanguage(RefNeedError):
    """Raised when a wiki language code is not in the configured set."""

    def __init__(self, lang: str):
        super().__init__(f"language {lang!r} is not configured")
        self.lang = lang


class MalformedMarkup(RefNeedError):
    """Raised when wikitext is damaged beyond recovery (no paragraph produced)."""


class AnchorOutOfRange(RefNeedError):
    """Raised when a reference anchor offset exceeds its paragraph length."""

    def __init__(self, offset: int, length: int):
        super().__init__(f"anchor offset {offset} exceeds paragraph length {length}")
        self.offset = offset
        self.length = length


class SchemaError(RefNeedError):
    """Raised when a serialized sentence record violates the dataset schema."""


class InsufficientData(RefNeedError):
    """Raised when a balanced sample cannot be drawn for a (language, label) pair."""

    def __init__(self, wiki_db: str, label: int, needed: int, available: int):
        super().__init__(
            f"{wiki_db} label={label}: need {needed} records, have {available}"
        )
        self.wiki_db = wiki_db
        self.label = label
        self.needed = needed
        self.available = available


class TokenizerError(RefNeedError):
    """Raised when a tokenizer artifact cannot be loaded."""


class BackendError(RefNeedError):
    """Raised when an inference backend fails (missing artifact, shape mismatch)."""


class BundleValidationError(RefNeedError):
    """Raised when a model bundle directory fails validation.

    ``field`` names the offending file or metadata key.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class RevisionNotFound(RefNeedError):
    """Raised when the upstream wiki has no revision with the requested id."""

    def __init__(self, lang: str, rev_id: int):
        super().__init__(f"revision {rev_id} not found on {lang}.wikipedia.org")
        self.lang = lang
        self.rev_id = rev_id


class UpstreamTimeout(RefNeedError):
    """Raised when the upstream wiki does not answer within the request timeout."""


class UpstreamError(RefNeedError):
    """Raised on a non-retryable upstream HTTP failure."""

    def __init__(self, status: int, message: str = ""):
        super().__init__(f"upstream returned {status}" + (f": {message}" if message else ""))
        self.status = status


class EmptyArticle(RefNeedError):
    """Raised when a revision yields zero assessable sentences after filtering."""


class DeadlineExceeded(RefNeedError):
    """Raised when the classification phase overruns its latency budget."""


class DegenerateLabels(RefNeedError):
    """Raised when a metric needs both classes but only one is present."""


class ClientError(RefNeedError):
    """Raised when a verbalizer completion client fails."""


class MissingLogprob(RefNeedError):
    """Raised when a verbalizer client response lacks the answer-token log-probability."""
