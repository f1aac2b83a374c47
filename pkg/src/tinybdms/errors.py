"""Exception hierarchy shared by every layer of tinybdms."""

from __future__ import annotations


class TinyBdmsError(Exception):
    """Base class for all errors raised by the system."""


class AdmSyntaxError(TinyBdmsError):
    """Malformed ADM or AQL text. Carries a 1-based line/column."""

    def __init__(self, message: str, line: int = 0, column: int = 0, expected=None):
        self.message = message
        self.line = line
        self.column = column
        self.expected = sorted(expected) if expected else []
        where = f" at line {line}, column {column}" if line else ""
        super().__init__(f"{message}{where}")


class AqlSyntaxError(AdmSyntaxError):
    pass


class SemanticError(TinyBdmsError):
    """A statement parsed but refers to things that do not exist or do not fit."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(message)


class CatalogError(SemanticError):
    pass


class UnknownType(CatalogError):
    pass


class QueryError(TinyBdmsError):
    """Runtime failure while evaluating a query expression."""


class ArithmeticOverflow(QueryError):
    pass


class TypeMismatch(QueryError):
    """A value had the wrong ADM type for an operation."""


class ConformanceError(TinyBdmsError):
    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(f"{path or '<root>'}: {reason}" for path, reason in report.violations))


class StorageError(TinyBdmsError):
    pass


class IndexClosed(StorageError):
    pass


class UnsortedInput(StorageError):
    pass


class DuplicateKey(TinyBdmsError):
    pass


class IngestError(TinyBdmsError):
    pass


class SimulatedCrash(BaseException):
    """Raised by an armed fault point. Derives from BaseException so that
    ordinary ``except Exception`` handlers cannot swallow the crash."""

    def __init__(self, point: str):
        self.point = point
        super().__init__(point)


class JobFailed(TinyBdmsError):
    """A runtime job aborted; ``cause`` is the first operator failure."""

    def __init__(self, message: str, operator: str = "", partition: int = -1, cause: BaseException | None = None,
                 trace_id: str = ""):
        self.operator = operator
        self.partition = partition
        self.cause = cause
        self.trace_id = trace_id
        super().__init__(message)
