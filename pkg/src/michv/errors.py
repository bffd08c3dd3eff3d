"""Exception hierarchy shared by every stage of the pipeline."""


class MichvError(Exception):
    """Base class for tool errors (never raised for a legal contract failure)."""

    exit_code = 1

    def __init__(self, message, span=None, source=None):
        super().__init__(message)
        self.message = message
        self.span = span
        self.source = source

    def location(self):
        """Return (line, col), both 1-based, or None when no span is known."""
        if self.span is None or self.source is None:
            return None
        offset = self.span[0]
        line = self.source.count("\n", 0, offset) + 1
        col = offset - (self.source.rfind("\n", 0, offset) + 1) + 1
        return line, col

    def diagnostic(self, filename="<input>", severity="error"):
        loc = self.location()
        if loc is None:
            return f"{filename}:1:1: {severity}: {self.message}"
        return f"{filename}:{loc[0]}:{loc[1]}: {severity}: {self.message}"


class LexError(MichvError):
    exit_code = 2


class ParseError(MichvError):
    exit_code = 2

    def __init__(self, message, span=None, source=None, expected=()):
        super().__init__(message, span, source)
        self.expected = tuple(expected)


class LiteralError(MichvError):
    """A data literal does not match the type it is read at."""

    exit_code = 2


class MichelsonTypeError(MichvError):
    exit_code = 3

    def __init__(self, message, path=(), expected=None, found=None, span=None, source=None):
        super().__init__(message, span, source)
        self.path = tuple(path)
        self.expected = expected
        self.found = found


class FormulaError(MichvError):
    """Unbound name, sort error, or a construct a backend cannot handle."""

    exit_code = 2


class SpecError(MichvError):
    """Malformed sidecar specification."""

    exit_code = 2


class VCGenError(MichvError):
    exit_code = 8
