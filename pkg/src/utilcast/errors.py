"""Exception hierarchy shared by all modules."""


class UtilcastError(Exception):
    """Base class for every error raised by this package."""


class SchemaError(UtilcastError):
    """Input does not have the expected columns, header or feature layout."""


class ParseError(UtilcastError):
    """A nested literal or cell value could not be interpreted."""

    def __init__(self, message, text=None):
        super().__init__(message if text is None else f"{message}: {text!r}")
        self.text = text


class ModelFormatError(UtilcastError):
    """A model file is truncated, corrupted or otherwise unreadable."""


class UnsupportedVersionError(ModelFormatError):
    """A model file declares a format version this build cannot read."""
