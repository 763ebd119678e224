class MvppError(Exception):
    """Base class for library errors."""

    code = "mvpp_error"


class InvalidInputError(MvppError, ValueError):
    code = "invalid_input"


class DegenerateLeverageError(MvppError, ArithmeticError):
    code = "degenerate_leverage"


class UnsupportedConfigurationError(MvppError, NotImplementedError):
    code = "unsupported_configuration"


class DegenerateClusterError(MvppError, ValueError):
    code = "degenerate_cluster"


class ParseError(MvppError, ValueError):
    code = "parse_error"

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
