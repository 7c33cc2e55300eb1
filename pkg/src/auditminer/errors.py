"""Exception hierarchy shared across the pipeline."""
from __future__ import annotations


class AuditMinerError(Exception):
    """Base class for every error raised by this package."""


# -- taxonomy --------------------------------------------------------------

class TaxonomySchemaError(AuditMinerError):
    """Taxonomy document is malformed; the message names the offending field."""


class TaxonomyIntegrityError(AuditMinerError):
    """Parent/child references do not form a consistent hierarchy."""

    def __init__(self, message: str, unresolved: list[str] | None = None):
        super().__init__(message)
        self.unresolved = list(unresolved or [])


class UnknownCweError(AuditMinerError):
    """Lookup of a CWE id that is not present in the tree."""


# -- ingest ----------------------------------------------------------------

class DocumentLoadError(AuditMinerError):
    """Report file could not be read."""


class ConversionError(AuditMinerError):
    """External converter failed; carries its stderr for diagnostics."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ChunkConfigError(AuditMinerError):
    """Invalid chunking configuration (e.g. non-positive budget)."""


# -- llm -------------------------------------------------------------------

class ProviderError(AuditMinerError):
    """Completion provider failed after exhausting its retry budget."""


class CompletionTimeoutError(ProviderError):
    """Request timed out on every attempt."""


class ApiStatusError(ProviderError):
    """Non-2xx API response."""

    def __init__(self, status: int, body_excerpt: str = ""):
        super().__init__(f"API returned status {status}: {body_excerpt}")
        self.status = status
        self.body_excerpt = body_excerpt


class JsonExtractError(AuditMinerError):
    """No parseable JSON value in model output; carries the raw text."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


# -- extractor -------------------------------------------------------------

class MapChunkError(AuditMinerError):
    """A single chunk could not be mapped even after a re-ask."""


class ExtractionError(AuditMinerError):
    """Whole-report extraction failed (every chunk map failed)."""


# -- classifier ------------------------------------------------------------

class ClassificationError(AuditMinerError):
    """Classification of one finding failed (provider gave up)."""


# -- fetcher ---------------------------------------------------------------

class FetchError(AuditMinerError):
    """Base class for source retrieval failures."""


class TransportError(FetchError):
    """Network-level failure that persisted through retries."""


class CommitNotFoundError(FetchError):
    """Repository exists but the requested commit does not."""


class EmptyBundleError(FetchError):
    """Retrieval succeeded but no source files matched the filter."""


class NoSourceError(FetchError):
    """Explorer has no verified source for the address."""


class UnsupportedChainError(FetchError):
    """No explorer configured for the requested chain."""


class AssemblyError(AuditMinerError):
    """Dataset record failed validation and was not written."""


class RecordConflictError(AuditMinerError):
    """Record already exists and force was not given."""


class RecordWriteError(AuditMinerError):
    """I/O failure while persisting a record."""


# -- analysis ----------------------------------------------------------------

class DegenerateLabelsError(AuditMinerError):
    """Agreement coefficient undefined: expected disagreement is zero."""


# -- cli ---------------------------------------------------------------------

class ConfigError(AuditMinerError):
    """Pipeline configuration is invalid."""


class UsageError(AuditMinerError):
    """Command invoked without required inputs."""


class StageDependencyError(AuditMinerError):
    """A stage's prerequisite artifacts are missing."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = list(missing or [])
