"""Exception hierarchy shared across the toolkit."""


class TerrarastError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedFormat(TerrarastError):
    """Input file format (or LAS point format) not supported."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CorruptHeader(TerrarastError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncatedPayload(TerrarastError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ParseError(TerrarastError):
    """ASCII point file parse failure; carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SpecMismatch(TerrarastError):
    """Raster grids with differing GridSpec fields were combined."""


class EmptyCloud(TerrarastError):
    pass


class TooFewPoints(TerrarastError):
    pass


class LengthMismatch(TerrarastError):
    pass


class DegenerateInput(TerrarastError):
    """Fewer than 3 points, or all points collinear in the xy-plane."""


class EmptyOverlap(TerrarastError):
    """No valid cells shared between the grids being compared."""


class FormatVersionMismatch(TerrarastError):
    pass


class ChecksumFailure(TerrarastError):
    pass


class DuplicateTile(TerrarastError):
    pass


class InvalidSpec(TerrarastError):
    """Malformed synthetic scene specification."""
