"""Quasi-periodic versus Brownian trajectories: classical series, box spectra,
Gibbs wavefunction ensembles and finite-mode quantum dynamics."""

from .exceptions import (QuasiBrownError, SolverError, SpectrumError, StepSizeError,
                         StructuralError, ValidationError)
from .signals import (ConvergenceVerdict, QuasiPeriodicSignal, Trajectory, classify_convergence,
                      evaluate_qp)

__version__ = "0.1.0"

__all__ = [
    "QuasiBrownError", "SolverError", "SpectrumError", "StepSizeError", "StructuralError",
    "ValidationError", "ConvergenceVerdict", "QuasiPeriodicSignal", "Trajectory",
    "classify_convergence", "evaluate_qp", "__version__",
]
