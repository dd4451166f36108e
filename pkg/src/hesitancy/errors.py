"""Shared error types for fatal configuration, ingest, and training failures."""


class ConfigError(ValueError):
    """Invalid or missing configuration input (paths, resolver tables, vector files)."""


class IngestError(ValueError):
    """Fatal data problem at load time (duplicate keys, out-of-range values)."""


class FitError(RuntimeError):
    """Model training failed: divergence or an unrecoverable fold failure."""
