"""
Exception hierarchy for gasrepair.

Everything raised on purpose by the package derives from GasRepairError, so callers
(the CLI in particular) can separate "expected" failures from programming errors.
Type errors are deliberately NOT exceptions: see lang.typecheck.
"""

from __future__ import annotations


class GasRepairError(Exception):
    """Root of all errors raised by gasrepair"""


class ConfigError(GasRepairError):
    """A configuration file or option could not be loaded or validated"""


class UsageError(GasRepairError):
    """The command line was malformed or referenced missing inputs"""


class ParseError(GasRepairError):
    """Malformed MiniSol source text."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class ApplyError(GasRepairError):
    """A patch could not be applied to the contract it was given"""


class SpaceExhausted(GasRepairError):
    """Every edit of a mutation space has been drawn for the current base"""


class PathExplosion(GasRepairError):
    """Path enumeration exceeded the configured path cap."""

    def __init__(self, function: str, cap: int):
        super().__init__(f"more than {cap} paths in function '{function}'")
        self.function = function
        self.cap = cap


class ExecutionError(GasRepairError):
    """An execution environment does not fit the contract (a caller bug)"""


class ExecutionTimeout(GasRepairError):
    """A concrete execution ran past its wall-clock deadline"""


class WeightError(GasRepairError):
    """Path weights do not match the enumerated paths"""


class ReplayError(GasRepairError):
    """One or more recorded transactions failed to replay.

    Attributes:
        failures: list of (transaction index, reason) pairs.
    """

    def __init__(self, failures: list[tuple[int, str]]):
        summary = "; ".join(f"#{index}: {reason}" for index, reason in failures)
        super().__init__(f"{len(failures)} transaction(s) failed to replay: {summary}")
        self.failures = failures
