"""Error types for the ingestion tool."""


class IngestError(Exception):
    """Base class."""


class SchemaError(IngestError):
    """A manifest or input file does not match its documented layout."""

    def __init__(self, message: str, path=None):
        self.path = path
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class IndexMapError(IngestError):
    """A required output joint or bone has no source mapping."""
