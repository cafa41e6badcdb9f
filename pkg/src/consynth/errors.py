"""Exception hierarchy shared across the package."""


class ConsynthError(Exception):
    """Base class for all package errors."""


class SchemaError(ConsynthError):
    """Invalid schema definition."""


class MissingColumn(ConsynthError):
    """A schema attribute is absent from the CSV header."""


class DomainViolation(ConsynthError):
    """A cell value falls outside its attribute domain."""

    def __init__(self, row: int, attr: str, value):
        self.row = row
        self.attr = attr
        self.value = value
        super().__init__(f"row {row}, attribute {attr!r}: value {value!r} outside domain")


class ParseError(ConsynthError):
    """A cell could not be parsed as the declared type."""

    def __init__(self, row: int, attr: str, raw: str):
        self.row = row
        self.attr = attr
        self.raw = raw
        super().__init__(f"row {row}, attribute {attr!r}: cannot parse {raw!r}")


class NotNumerical(ConsynthError):
    """Operation requires a numerical attribute."""


class OutOfRange(ConsynthError):
    """Value or bin index outside the attribute range."""


class DCSyntaxError(ConsynthError):
    """Denial constraint text does not match the grammar."""


class UnknownAttribute(ConsynthError):
    """A constraint references an attribute missing from the schema."""


class TypeMismatch(ConsynthError):
    """Predicate operands have incompatible types or lack an order."""


class InsufficientAttributes(ConsynthError):
    """A projected violation count was requested before all constraint
    attributes were assigned."""


class UnsupportedArity(ConsynthError):
    """Only arity-1 and arity-2 constraints are supported here."""


class InvalidOrder(ConsynthError):
    """RDP order must be an integer >= 2."""


class InvalidRate(ConsynthError):
    """Sampling rate must lie in (0, 1)."""


class EmptyCurve(ConsynthError):
    """An RDP curve with no evaluated orders cannot be converted."""


class BudgetInfeasible(ConsynthError):
    """No parameter setting within the search ranges meets the budget."""


class EmptyContext(ConsynthError):
    """Sub-models require at least one context attribute."""


class UnknownContextValue(ConsynthError):
    """A context value is absent from the model's embedding table."""


class SchemaMismatch(ConsynthError):
    """Two datasets that must share a schema do not."""
