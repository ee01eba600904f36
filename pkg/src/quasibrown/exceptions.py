class QuasiBrownError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(QuasiBrownError, ValueError):
    """An input violates a documented precondition."""


class StructuralError(QuasiBrownError, ValueError):
    """Inputs have inconsistent shapes or lengths."""


class SpectrumError(QuasiBrownError, ValueError):
    """An energy cutoff admits no eigenvalues."""


class SolverError(QuasiBrownError, RuntimeError):
    """The iterative eigensolver did not converge within its budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class StepSizeError(QuasiBrownError, RuntimeError):
    """Integrator accuracy gauge exceeded; retry with a smaller step."""

    def __init__(self, message, drift=None):
        super().__init__(message)
        self.drift = drift
