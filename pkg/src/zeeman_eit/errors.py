"""Exception types shared across the toolkit.

The CLI maps these onto distinct exit codes: configuration problems,
numerical (solver/quadrature) failures, and fitting/classification
failures are reported separately.
"""


class ZeemanEitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ZeemanEitError):
    """Invalid or inconsistent run configuration."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class GeometryError(ZeemanEitError):
    """Degenerate field geometry (quantization axis undefined)."""


class NumericalFailure(ZeemanEitError):
    """Linear solve or quadrature did not converge to tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BaselineFitError(ZeemanEitError):
    """Background fit for baseline subtraction diverged."""


class PeakFitError(ZeemanEitError):
    """Multi-peak fit failed to converge."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class ClassificationError(ZeemanEitError):
    """Peak centers could not be assigned to the Zeeman grid."""

    def __init__(self, message, offenders=None):
        super().__init__(message)
        self.offenders = list(offenders or [])


class ResolutionError(ZeemanEitError):
    """Input sampling too sparse for the requested analysis."""
