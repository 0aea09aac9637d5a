"""Shared exception types."""


class ValidationError(Exception):
    """Raised when an input or argument violates a documented contract."""


class ParseError(ValidationError):
    """Raised when an input file cannot be parsed."""
