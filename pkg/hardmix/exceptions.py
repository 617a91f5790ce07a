"""
Exceptions and warnings raised by `hardmix`.

Every error derives from `HardmixError`.  Errors caused by bad arguments also
derive from `ValueError`.  The command line maps the families to exit codes:

+------------------------------+------+
| configuration / input errors | 2    |
+------------------------------+------+
| flow pathologies             | 3    |
+------------------------------+------+
| numerical failures           | 4    |
+------------------------------+------+
"""
__all__ = [
    "BoundaryPreconditionError",
    "ConfigError",
    "EmptyDomainError",
    "ExhaustedReservoirError",
    "HardmixError",
    "HardmixWarning",
    "HorizonWarning",
    "InfeasibleDensityError",
    "InvalidInputError",
    "InvalidStateError",
    "NegativeDensityWarning",
    "NonContractionError",
    "NumericalFailure",
    "PathologyError",
    "ScalingInfeasibleError",
    "SeparationError",
    "ValidationError",
]

from typing import Any, Optional


class HardmixError(Exception):
    """Base class for all `hardmix` errors."""


class InvalidInputError(HardmixError, ValueError):
    """An argument violates a precondition (e.g. a non-unit normal)."""


class InvalidStateError(HardmixError):
    """A configuration is outside the phase space (overlapping spheres)."""


class BoundaryPreconditionError(HardmixError):
    """
    The impact operator was applied to a configuration that is not in a
    simple non-grazing contact.

    Parameters
    ----------
    message : str
        Error message.

    boundary : `~hardmix.mixture.collisions.BoundaryClass`
        The classification of the offending configuration.
    """

    def __init__(self, message: str, boundary: Any = None):
        super().__init__(message)
        self.boundary = boundary


class PathologyError(HardmixError):
    """
    A trajectory hit a multiple collision, a grazing collision, or exhausted
    its event budget.

    Parameters
    ----------
    message : str
        Error message.

    pathology : `~hardmix.dynamics.flow.Pathology`
        The pathology record (kind and time).
    """

    def __init__(self, message: str, pathology: Any = None):
        super().__init__(message)
        self.pathology = pathology


class ScalingInfeasibleError(HardmixError, ValueError):
    """The requested scaling does not produce an integral particle number."""


class NumericalFailure(HardmixError):
    """Base class for failures of numerical procedures."""


class ExhaustedReservoirError(NumericalFailure):
    """No particles of the adjoined species are left to adjoin."""


class InfeasibleDensityError(NumericalFailure):
    """Rejection sampling onto the phase space accepts too rarely."""


class NonContractionError(NumericalFailure):
    """Picard iteration failed to contract; shorten the horizon."""


class EmptyDomainError(HardmixError, ValueError):
    """An integration domain (e.g. a separated time simplex) is empty."""


class ValidationError(HardmixError, ValueError):
    """Structured data (histories, ensembles, comparisons) is inconsistent."""


class SeparationError(HardmixError, ValueError):
    """Positions are not separated by the required distance."""


class ConfigError(HardmixError, ValueError):
    """
    A run configuration is invalid.

    Parameters
    ----------
    field : str
        Dotted path of the offending field (e.g. ``"mixture.mass.A"``).

    message : str
        What is wrong with the field.

    line : int, optional
        One-based line of the field in the YAML source, when known.
    """

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.message = message
        self.line = line
        where = f"{field}" if line is None else f"{field} (line {line})"
        super().__init__(f"{where}: {message}")


class HardmixWarning(UserWarning):
    """Base class for advisory `hardmix` warnings."""


class NegativeDensityWarning(HardmixWarning):
    """A Picard iterate took negative values."""


class HorizonWarning(HardmixWarning):
    """A horizon exceeds the local well-posedness heuristic."""
