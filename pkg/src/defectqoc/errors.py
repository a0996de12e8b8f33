"""Exception hierarchy shared across the package."""


class DefectQOCError(Exception):
    """Base class for all package errors."""


class ValidationError(DefectQOCError, ValueError):
    """Input violates a documented invariant (bad site, mismatched sizes, ...)."""


class SizeError(DefectQOCError, ValueError):
    """Dense realization requested beyond the qubit-count guard."""


class SymmetryViolationError(DefectQOCError, ValueError):
    """A sector assignment touches a site that does not carry a conserved X."""


class DegenerateReferenceError(DefectQOCError, ValueError):
    """Stabilizer projection annihilated the reference state."""


class AdiabaticityError(DefectQOCError, RuntimeError):
    """Adiabatic reference evolution did not land in the final ground space."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(DefectQOCError, ValueError):
    """Optimizer was called without the data it needs."""


class UnknownProblemError(DefectQOCError, LookupError):
    """Preset name not in the catalog."""
