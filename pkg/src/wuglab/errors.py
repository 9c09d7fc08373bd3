"""Exception types shared across the toolkit."""


class WuglabError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(WuglabError):
    """Bad configuration, malformed input, or a violated precondition."""


class ShapeError(ValidationError):
    """Tensor operands whose shapes do not conform."""


class NumericError(WuglabError):
    """A computation produced a NaN or Inf value."""


class UnknownPhonemeError(ValidationError):
    """A phoneme token absent from the vocabulary."""

    def __init__(self, token: str):
        super().__init__(f"unknown phoneme token: {token!r}")
        self.token = token


class DataFormatError(ValidationError):
    """Malformed data file; carries the offending location."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where = f" [{where}]"
        super().__init__(message + where)
        self.path = path
        self.line = line


class CheckpointError(WuglabError):
    """Unreadable checkpoint: bad version, truncation, or checksum failure."""


class ProvenanceError(WuglabError):
    """Artifacts whose recorded provenance does not match the request."""
