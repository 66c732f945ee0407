"""Exception types shared across the library."""


class ScqcError(Exception):
    """Base class for all library errors."""


class DegenerateCurve(ScqcError):
    """Curve has (numerically) zero length or repeated samples."""


class UndefinedFrame(ScqcError):
    """Frenet frame requested where the curvature vanishes."""


class NotOnSphere(ScqcError):
    """Spherical-curve samples are not unit vectors."""


class NotArclength(ScqcError):
    """Operation requires an arc-length parameterized curve."""


class InvalidInput(ScqcError):
    """Malformed numerical input (NaN, wrong shape, violated precondition)."""


class UnsupportedCurve(ScqcError):
    """Curve outside the class an operation can handle."""


class WrongModel(ScqcError):
    """Fields do not satisfy the model assumed by the operation."""


class StepTooCoarse(ScqcError):
    """Integration step too large for the requested Hamiltonian."""


class TruncatedFrame(ScqcError):
    """Operator frame recursion terminated before the requested depth."""

    def __init__(self, depth_achieved, message=None):
        self.depth_achieved = depth_achieved
        super().__init__(message or f"frame recursion truncated at depth {depth_achieved}")


class NoConvergence(ScqcError):
    """Iterative solver failed; carries the best residual seen."""

    def __init__(self, best_residual, message=None):
        self.best_residual = best_residual
        super().__init__(message or f"no convergence, best residual {best_residual:.3e}")


class CoverageError(ScqcError):
    """Spectrum support exceeds the sampled filter grid."""


class FrequencyRangeTooWide(ScqcError):
    """Requested frequencies alias on the given time grid."""


class NotFound(ScqcError, KeyError):
    """Unknown catalog entry."""


class DistributionalPulseWarning(UserWarning):
    """Extracted pulse contains delta-function impulses the sampled series cannot hold."""
