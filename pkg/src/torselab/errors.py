"""Exception hierarchy shared by the kernel, the scenario loader and the CLI."""


class TorselabError(Exception):
    """Base class for every error raised by torselab."""


# -- expression language -----------------------------------------------------


class ExprError(TorselabError):
    pass


class ExprSyntaxError(ExprError):
    """Positioned parse failure. ``line`` and ``col`` are 1-based."""

    def __init__(self, message: str, line: int, col: int, expected: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        detail = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at line {line}, col {col}{detail}")


class UnknownFunction(ExprError):
    pass


class UnknownVariable(ExprError):
    pass


class UnboundParameter(ExprError):
    pass


class DomainError(ExprError, ArithmeticError):
    """An elementary function was evaluated outside its domain."""


# -- geometry ------------------------------------------------------------------


class SingularMetric(TorselabError):
    pass


class ZeroVectorAtPoint(TorselabError):
    pass


class InsufficientSamples(TorselabError):
    pass


# -- scenarios -----------------------------------------------------------------


class ScenarioError(TorselabError):
    """Input problem with a scenario file or name (CLI exit code 2)."""


class ScenarioNotFound(ScenarioError, FileNotFoundError):
    pass


class SchemaError(ScenarioError):
    pass


class DimensionMismatch(SchemaError):
    pass
