"""Exception hierarchy shared by the kernel, the CLI and the worker tasks."""

from typing import Optional, Sequence


class BugsError(Exception):
    """Base class for every error raised by this package."""


class ParseError(BugsError):
    """Model text could not be parsed.

    Attributes:
        line: 1-based line of the offending token.
        column: 1-based column of the offending token.
        token: Text of the offending token ("" at end of input).
    """

    def __init__(self, message: str, line: int = 0, column: int = 0, token: str = ""):
        self.line = line
        self.column = column
        self.token = token
        location = f"line {line}, column {column}" if line else "end of input"
        shown = f" near '{token}'" if token else ""
        super().__init__(f"{message} ({location}{shown})")


class ModelDefinitionError(BugsError):
    """The parsed model could not be turned into a graph."""


class UnresolvedSymbolError(ModelDefinitionError):
    """A name is used but neither declared nor supplied as a constant."""

    def __init__(self, symbol: str, context: str = ""):
        self.symbol = symbol
        suffix = f" in {context}" if context else ""
        super().__init__(f"Unresolved symbol '{symbol}'{suffix}")


class CycleError(ModelDefinitionError):
    """The declarations form a directed cycle."""

    def __init__(self, path: Sequence[str]):
        self.path = list(path)
        super().__init__("Cycle detected in model graph: " + " -> ".join(self.path))


class DistributionError(BugsError):
    """Unknown distribution, bad parameter set or invalid parameter values."""


class ModelError(BugsError):
    """Runtime model, value-access, ModelValues or copy failure."""


class AlgorithmError(BugsError):
    """An algorithm was specialized or run with unusable arguments."""


class DiagnosticsError(BugsError):
    """A chain cannot be summarised."""


class DegenerateChainError(DiagnosticsError):
    """The chain has (numerically) zero variance."""


class ConfigError(BugsError):
    """Invalid run configuration or input file."""

    def __init__(self, message: str, source: Optional[str] = None):
        self.source = source
        super().__init__(f"{source}: {message}" if source else message)


class NumericError(BugsError):
    """A numeric failure at run time, e.g. an estimate that is not finite."""
