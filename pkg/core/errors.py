"""
Error types for the step-flow laboratory

Every failure the library can signal derives from StepFlowError. Each class
carries the process exit code the command-line driver reports for it.
"""
from typing import Any, Optional


class StepFlowError(Exception):
    """Base class for all step-flow errors"""

    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context


class ConfigError(StepFlowError):
    """Invalid configuration; the message names the offending key"""

    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None, **context: Any):
        super().__init__(message, key=key, **context)
        self.key = key


class ProfileError(StepFlowError):
    """Initial profile is not strictly decreasing"""

    exit_code = 2


class GridSizeError(StepFlowError):
    """Grid size is not an admissible power of two"""

    exit_code = 2


class InversionError(StepFlowError):
    """h or phi could not be inverted"""

    exit_code = 4


class SamplingError(StepFlowError):
    """Sampling a step train from phi did not produce an ordered train"""

    exit_code = 4


class QuadratureError(StepFlowError):
    """Singular quadrature failed or received coincident nodes"""

    exit_code = 5


class MonotonicityLostError(StepFlowError):
    """The continuum profile left the strictly decreasing regime"""

    exit_code = 4

    def __init__(self, message: str, trajectory: Any = None,
                 time: Optional[float] = None, **context: Any):
        super().__init__(message, **context)
        self.trajectory = trajectory
        self.time = time


class IntegrationError(StepFlowError):
    """Time integration aborted; keeps the partial trajectory"""

    exit_code = 5

    def __init__(self, message: str, trajectory: Any = None,
                 time: Optional[float] = None, **context: Any):
        super().__init__(message, **context)
        self.trajectory = trajectory
        self.time = time


class StepCollisionError(IntegrationError):
    """Two steps came closer than the collision threshold"""

    exit_code = 3


class IntegratorError(IntegrationError):
    """Step-size underflow or a singular implicit solve"""

    exit_code = 5


class FitError(StepFlowError):
    """Order fit received too few or non-positive samples"""

    exit_code = 2


class StudyError(StepFlowError):
    """A sub-run of a sweep failed; names the failing N"""

    def __init__(self, message: str, N: Optional[int] = None,
                 cause: Optional[StepFlowError] = None, **context: Any):
        super().__init__(message, N=N, **context)
        self.N = N
        self.cause = cause
        self.exit_code = cause.exit_code if cause is not None else 1


class AcceptanceError(StepFlowError):
    """A selftest invariant suite failed"""

    exit_code = 6
