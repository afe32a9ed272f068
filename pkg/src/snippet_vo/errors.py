"""Exception types raised across the package."""


class SnippetVOError(Exception):
    """Base class for all errors raised by snippet_vo."""


class InvalidRotationError(SnippetVOError, ValueError):
    pass


class InvalidDepthError(SnippetVOError, ValueError):
    pass


class BehindCameraError(SnippetVOError, ValueError):
    pass


class OutOfBoundsError(SnippetVOError, IndexError):
    pass


class DimensionMismatchError(SnippetVOError, ValueError):
    pass


class ImageTooSmallError(SnippetVOError, ValueError):
    pass


class DegenerateGeometryError(SnippetVOError, ValueError):
    pass


class DegenerateInputError(SnippetVOError, ValueError):
    pass


class IncompleteInputError(SnippetVOError, ValueError):
    pass


class FormatError(SnippetVOError, ValueError):
    """Malformed file content.  ``location`` names the line or byte offset."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)
