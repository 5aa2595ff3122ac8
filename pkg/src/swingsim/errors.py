"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (a ``ValueError``);
the CLI maps families of exceptions onto exit codes.
"""


class SwingSimError(Exception):
    """Base class for all package errors."""


class ValidationError(SwingSimError, ValueError):
    """An input violates a model invariant."""


class DisconnectedGraph(ValidationError):
    pass


class MissingGenerator(ValidationError):
    pass


class MultipleGenerators(ValidationError):
    pass


class NominalImbalance(ValidationError):
    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"nominal powers are not balanced: P_G* + sum(P_I*) - sum(P_L*) = {residual:.12g}"
        )


class NonpositiveParameter(ValidationError):
    pass


class NonpositiveInertia(NonpositiveParameter):
    pass


class NonpositiveCost(NonpositiveParameter):
    pass


class SharingVectorUnnormalized(ValidationError):
    pass


class ZeroGainDivision(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class ZeroDenominator(ValidationError):
    pass


class WindowTooLong(ValidationError):
    pass


class InvalidScenario(ValidationError):
    pass


class VoltageCollapse(SwingSimError):
    """Direct-axis voltage fell below the floor used to compute i*_d."""


class NonFiniteState(SwingSimError):
    """Integration diverged (state magnitude above the guard threshold)."""


class AssertionFailure(SwingSimError, AssertionError):
    """A built-in reproduction check did not hold."""


class ConfigError(ValidationError):
    pass


class ParseError(ConfigError):
    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)


class SchemaError(ConfigError):
    def __init__(self, field: str, msg: str):
        self.field = field
        super().__init__(f"{field}: {msg}")
