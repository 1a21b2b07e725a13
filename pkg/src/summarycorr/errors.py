"""Exception hierarchy shared by the library and the command line."""


class SummaryCorrError(Exception):
    """Base class for all errors raised by :mod:`summarycorr`."""


class DomainError(SummaryCorrError, ValueError):
    """An argument lies outside the domain of the function."""


class DegenerateInputError(SummaryCorrError, ValueError):
    """Input is well-typed but carries no usable variation (zero variance)."""


class NumericalError(SummaryCorrError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy value."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InputFormatError(SummaryCorrError, ValueError):
    """Malformed tabular input (bad header, unparsable cell)."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(SummaryCorrError, ValueError):
    """Parsed input violates a model invariant (for example ``n < 3``)."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
