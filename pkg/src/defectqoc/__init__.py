"""Optimal control of surface-code defect operations.

Stabilizer control problems, exact piecewise-constant propagation, GRAPE
with limited-memory BFGS, and sector-block reduction for problems with
conserved single-site X operators.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AdiabaticityError,
    ConfigurationError,
    DefectQOCError,
    DegenerateReferenceError,
    SizeError,
    SymmetryViolationError,
    UnknownProblemError,
    ValidationError,
)
from .fidelity import (  # noqa: E402
    FidelityValue,
    ensemble_fidelity,
    gate_fidelity,
    phase_sensitive_fidelity,
    state_fidelity,
)
from .grape import (  # noqa: E402
    OptimizationReport,
    OptimizerConfig,
    Targets,
    infidelity,
    infidelity_and_gradient,
    optimize,
    prepare_targets,
)
from .pauli import OperatorSum, PauliTerm, commutes, pauli, realize  # noqa: E402
from .problems import ControlProblem, available_presets, load_problem, preset  # noqa: E402
from .propagation import Propagator, Pulse, linear_ramp, propagate  # noqa: E402
from .symmetry import block_decompose, equivalence_classes  # noqa: E402

__all__ = [
    "AdiabaticityError", "ConfigurationError", "DefectQOCError", "DegenerateReferenceError",
    "SizeError", "SymmetryViolationError", "UnknownProblemError", "ValidationError",
    "FidelityValue", "ensemble_fidelity", "gate_fidelity", "phase_sensitive_fidelity",
    "state_fidelity", "OptimizationReport", "OptimizerConfig", "Targets", "infidelity",
    "infidelity_and_gradient", "optimize", "prepare_targets", "OperatorSum", "PauliTerm",
    "commutes", "pauli", "realize", "ControlProblem", "available_presets", "load_problem",
    "preset", "Propagator", "Pulse", "linear_ramp", "propagate", "block_decompose",
    "equivalence_classes",
]
