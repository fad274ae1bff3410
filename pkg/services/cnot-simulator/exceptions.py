"""
Simulator Exceptions
Every error raised by the simulator is a ValueError subclass
"""
from typing import Optional


class SimulationError(ValueError):
    """Base class for simulator errors"""


class ConfigurationError(SimulationError):
    """Inconsistent gate, cascade or port configuration"""


class PreconditionError(SimulationError):
    """An operation was called outside its documented preconditions"""


class EmptyOutcomeError(SimulationError):
    """Post-selected state carries no probability"""


class FitError(SimulationError):
    """Fringe fit input is degenerate"""


class ConfigValidationError(SimulationError):
    """A config value violates an invariant"""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class ConfigParseError(SimulationError):
    """Config text could not be parsed"""

    def __init__(self, line: Optional[int], message: str):
        self.line = line
        where = f"line {line}" if line is not None else "config"
        super().__init__(f"{where}: {message}")
