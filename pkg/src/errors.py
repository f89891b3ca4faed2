"""
Exceptions raised by the Young measure toolkit
"""


class YoungMeasureError(Exception):
    """Base class for every error raised by this package"""


class ExpressionError(YoungMeasureError):
    pass


class ExpressionSyntaxError(ExpressionError):
    """Parse failure at a byte offset, with the set of tokens that would have been accepted"""

    def __init__(self, message: str, offset: int, expected=frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ExpressionError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"Unknown identifier '{name}' at offset {offset}")


class EvaluationDomainError(ExpressionError):
    """log/sqrt of a negative argument, division by zero, or a non-finite result"""


class DomainError(YoungMeasureError):
    """A point or set lies outside the domain Ω or the support K"""


class AmbiguousPointError(DomainError):
    """Evaluation requested on a partition knot"""


class InversionError(YoungMeasureError):
    pass


class SingularPointError(YoungMeasureError):
    def __init__(self, y: float, message: str = ""):
        self.y = y
        super().__init__(message or f"Derivative vanishes at the preimage of y={y!r}")


class ValidationError(YoungMeasureError):
    def __init__(self, report, message: str = ""):
        self.report = report
        failed = ", ".join(check.name for check in report.failures)
        super().__init__(message or f"Validation failed: {failed}")


class OntoConditionError(ValidationError):
    """A piece does not map its cell onto K"""


class QuadratureError(YoungMeasureError):
    pass


class ConstructionError(YoungMeasureError):
    pass


class SequenceError(YoungMeasureError):
    pass


class FamilyMismatchError(YoungMeasureError):
    pass


class SpecError(YoungMeasureError):
    """Malformed function-spec or density-spec document"""
