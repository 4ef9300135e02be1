"""Exception hierarchy for the carnot_lab package.

Every error raised on purpose by the library derives from LabError, so
callers can catch the whole family at once. The concrete classes also
inherit from the matching builtin (ValueError / RuntimeError) which keeps
plain `except ValueError` call sites working.
"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for all laboratory errors."""


class InvalidInputError(LabError, ValueError):
    """Arguments violate an operation precondition."""


class UnsupportedOperationError(LabError, ValueError):
    """The operation is undefined for the given group model (e.g. dilations on a torus)."""


class DomainError(LabError, ValueError):
    """A tabulated function was evaluated outside its knots."""


class CapacityError(LabError, RuntimeError):
    """The exact transport solver was asked for an instance above its cap."""


class NumericalError(LabError, RuntimeError):
    """An iterative solver did not converge.

    Attributes:
        diagnostics: solver-specific residuals and iteration counts
    """

    def __init__(self, msg: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(msg)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedScenarioError(LabError, ValueError):
    """A certificate's hypotheses do not hold for this scenario."""


class ConfigError(LabError, ValueError):
    """Scenario file could not be parsed or validated.

    Attributes:
        line: 1-based line in the config text, when it could be located
    """

    def __init__(self, msg: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = path or "<config>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {msg}")
