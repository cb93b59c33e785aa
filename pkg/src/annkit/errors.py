"""Exception types shared across the package.

Invalid arguments raise ``ValueError`` (or the more specific
``UnsupportedCombinationError``), out-of-range ids raise ``IndexError``,
and operations on released state raise ``RuntimeError``. File parsing
failures raise ``FormatError`` so callers can distinguish malformed input
from bad arguments.
"""


class FormatError(Exception):
    """A binary file does not conform to its expected layout.

    Attributes:
        offset: Byte offset of the first offending byte, or None when the
            failure is not tied to a specific position.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedCombinationError(ValueError):
    """A measure/vector-kind combination that the engine does not define,
    e.g. squared L2 over sparse vectors."""
