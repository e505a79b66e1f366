"""Exception taxonomy for cheegerkit.

Every failure mode that callers are expected to handle gets its own class so
the CLI can map it to an exit code and tests can assert on the exact cause.
All of them derive from CheegerKitError.
"""


class CheegerKitError(Exception):
    """Base class for all cheegerkit errors."""


class DomainError(CheegerKitError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class DegenerateCurveError(CheegerKitError, ValueError):
    """The curve is not immersed: |p'(u)| vanishes at a sample."""


class ClosureError(CheegerKitError, ValueError):
    """The curve table does not close up: p(0) and p(1-) disagree."""


class NumericError(CheegerKitError, ArithmeticError):
    """Non-finite values appeared where finite ones are required."""


class IntegrationFailureError(CheegerKitError, ArithmeticError):
    """Frame integration drifted from orthonormality beyond the hard cap.

    Raised with the measured drift; the fix is a larger n_steps.
    """


class InvalidGeometryError(CheegerKitError, ValueError):
    """Geometric quantities requested for a tube that overlaps itself."""


class HypothesisViolatedError(CheegerKitError, ValueError):
    """A closed form was requested outside the hypotheses that make it valid."""


class AmbiguousProjectionError(CheegerKitError, ValueError):
    """Nearest-point projection found two minimizers; the tube overlaps."""


class TooFewSamplesError(CheegerKitError, ValueError):
    """A statistical estimator was asked to run on too few samples."""


class UndersampledError(CheegerKitError, ValueError):
    """Fewer than half of the requested samples survived margin filtering."""


class StencilError(CheegerKitError, ValueError):
    """A finite-difference stencil leaves the domain at the query point."""


class EmptyDomainError(CheegerKitError, ValueError):
    """Rasterization produced no inside cells."""


class ConfigurationError(CheegerKitError, ValueError):
    """Unsupported or inconsistent configuration (stencil, flags, files)."""


class NonConvergenceError(CheegerKitError, ArithmeticError):
    """Ratio iteration hit its cap; carries the trace for diagnosis."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
