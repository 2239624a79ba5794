"""Exception hierarchy shared by every convsel module."""


class ConvselError(Exception):
    """Base class for all errors raised by convsel."""


class InvalidShape(ConvselError, ValueError):
    """A layer shape violates its construction invariants."""


class DimensionMismatch(ConvselError, ValueError):
    """Tensor dimensions disagree with the declared layer shape."""


class UnsupportedShape(ConvselError):
    """A backend cannot handle this layer shape (e.g. Winograd with K != 3)."""


class EmptyGrid(ConvselError, ValueError):
    pass


class AllMethodsFailed(ConvselError):
    """No convolution method produced a usable timing for a layer."""


class ParseError(ConvselError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class FormatVersionMismatch(ConvselError):
    """Model file does not start with the expected magic header."""


class EmptyDataset(ConvselError, ValueError):
    pass


class EmptyNode(ConvselError, ValueError):
    pass


class MissingShape(ConvselError, KeyError):
    """The timing source has no entry for a requested layer shape."""

    def __str__(self):
        return str(self.args[0]) if self.args else "missing shape"
