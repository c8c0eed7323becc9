"""Exception hierarchy shared by all ncint modules."""


class NcintError(Exception):
    """Base class for every error raised by the package."""


class UnboundVariable(NcintError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name!r}"


class DomainError(NcintError, ValueError):
    """A point lies outside the domain of an expression (outside the chart)."""


class ParseError(NcintError, ValueError):
    """Malformed expression or system file; carries a 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" at line {line}"
            if column is not None:
                where += f", column {column}"
        super().__init__(message + where)


class ValidationError(NcintError, ValueError):
    pass


class DegenerateForm(NcintError, ValueError):
    pass


class SingularChart(NcintError, ValueError):
    pass


class InvalidStructureConstants(NcintError, ValueError):
    pass


class MissingCasimirs(NcintError, ValueError):
    pass


class FlowEscapedChart(DomainError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class StepUnderflow(NcintError, RuntimeError):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class FixedPoint(NcintError, ValueError):
    pass


class IndexOutOfRange(NcintError, IndexError):
    pass
