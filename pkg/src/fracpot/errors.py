"""Exception types shared across the package.

Validation failures (bad arguments, unusable geometry or scale ranges) are
ValueError subclasses so ordinary argument checking catches them; runtime
failures of iterative algorithms are RuntimeError subclasses.
"""

from __future__ import annotations


class DegenerateScaleError(ValueError):
    """A normalization factor is non-finite at some (point, scale) pair.

    Raised during approximation-of-the-identity assembly when T_t 1 or
    T_t(1/T_t 1) vanishes (empty effective ball), naming the offending
    point index and scale.
    """

    def __init__(self, point_index: int, t: float, detail: str = ""):
        self.point_index = int(point_index)
        self.t = float(t)
        msg = f"degenerate scale: point {point_index} at t={t!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BoundaryScaleError(ValueError):
    """A centered log-difference was requested at the edge of the scale grid."""


class InsufficientScalesError(ValueError):
    """Too few scale values in the requested range to fit or integrate."""


class GuardViolationError(ValueError):
    """A test function's support touches the truncation boundary."""


class DegenerateRadiusError(ValueError):
    """A continuity-modulus radius below the sample resolution."""


class HypothesisViolationError(ValueError):
    """Experiment parameters violate the hypothesis of the statement tested."""


class InvalidRegimeError(ValueError):
    """Requested embedding regime is inconsistent with (p, alpha, N)."""


class InsufficientGeometryError(ValueError):
    """The space contains no valid pairs in the regime a check requires."""


class NotContractiveError(RuntimeError):
    """Neumann inversion requested but the residual operator has norm >= 1."""

    def __init__(self, norm_estimate: float):
        self.norm_estimate = float(norm_estimate)
        super().__init__(
            f"residual operator norm estimate {norm_estimate:.6g} >= 1; "
            "Neumann series will not converge"
        )


class ConvergenceError(RuntimeError):
    """An iteration hit its cap before reaching tolerance.

    Carries the last achieved residual so callers can decide whether the
    partial answer is usable.
    """

    def __init__(self, message: str, residual: float):
        self.residual = float(residual)
        super().__init__(f"{message} (last residual {residual:.6g})")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""
