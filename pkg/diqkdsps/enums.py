"""Enumerations for the diqkdsps package.

Error codes used throughout the package for consistent error handling, plus
the small closed vocabularies that travel through results (rate method,
solver status).
"""

from enum import Enum


class ErrorCode(Enum):
    """Error codes attached to every DiqkdError.

    Example:
        ```python
        from diqkdsps import transmission_efficiency, DiqkdError, ErrorCode

        try:
            transmission_efficiency(10.0, 0.0)
        except DiqkdError as e:
            if e.code == ErrorCode.INVALID_PARAMETER:
                print("L0 must be positive")
        ```
    """
    INVALID_PARAMETER = "INVALID_PARAMETER"
    """Raised when an input lies outside its physical or mathematical domain."""

    MODEL_ERROR = "MODEL_ERROR"
    """Raised when the photonic model cannot be built (e.g. a Gram matrix that is not PSD)."""

    CONSTRAINT_ERROR = "CONSTRAINT_ERROR"
    """Raised when a behavior cannot constrain a moment problem (e.g. it signals)."""

    SOLVER_FAILURE = "SOLVER_FAILURE"
    """Raised when the SDP solver breaks down or reports infeasibility."""

    SAMPLING_EXHAUSTED = "SAMPLING_EXHAUSTED"
    """Raised when no nonlocal seed is found within the attempt budget."""

    CONFIG_ERROR = "CONFIG_ERROR"
    """Raised when an experiment config fails schema validation."""

    IO_ERROR = "IO_ERROR"
    """Raised when a file cannot be read, parsed or written."""


class RateMethod(Enum):
    """How the conditional entropy H(A|X=x',E) is bounded."""
    ANALYTIC = "analytic"
    """CHSH-based closed form without preprocessing."""

    ANALYTIC_PREPROCESSING = "analytic+preprocessing"
    """CHSH-based closed form with noisy preprocessing."""

    SDP = "sdp"
    """Gauss-Radau / NPA semidefinite relaxation."""


class SolverStatus(Enum):
    """Outcome of an SDP solve."""
    OPTIMAL = "optimal"
    MAX_ITER = "max-iter"
    INFEASIBLE = "infeasible"
    NUMERICAL_ERROR = "numerical-error"
