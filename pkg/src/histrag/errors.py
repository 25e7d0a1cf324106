"""Exception hierarchy shared by every module."""

from __future__ import annotations


class HistragError(Exception):
    """Base class for all package errors."""


class ConfigError(HistragError):
    """Invalid or missing configuration (never retried)."""


class BackendError(HistragError):
    """A remote backend failed after exhausting its retry policy."""

    def __init__(self, component: str, message: str):
        super().__init__(f"{component}: {message}")
        self.component = component


class CorpusFormatError(HistragError):
    pass


class AnnotationError(HistragError):
    def __init__(self, chunk_id: str, message: str):
        super().__init__(f"annotation failed for {chunk_id}: {message}")
        self.chunk_id = chunk_id


class IndexFormatError(HistragError):
    pass


class DimensionMismatchError(HistragError):
    pass


class UndefinedMetricError(HistragError):
    """Raised when a metric is mathematically undefined for its input."""


class ClusteringError(HistragError):
    pass
