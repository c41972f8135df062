"""Exception types shared across the package."""


class CobeamError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(CobeamError):
    """A scenario or topology description is inconsistent or incomplete."""


class StateError(CobeamError):
    """An operation was invoked on an object missing required state
    (for example evaluating SINR before beamformers were extracted)."""


class InfeasibleTargetsError(CobeamError):
    """The SINR targets cannot be met for the given channels.  Admission
    control (out of scope here) would have to relax the requirements."""


class RandomizationFailureError(CobeamError):
    """Every Gaussian randomization candidate failed its power
    optimization.  The relaxed (higher-rank) solution is attached so the
    caller can retry with a different sub-seed."""

    def __init__(self, message, sdr_solution=None):
        super().__init__(message)
        self.sdr_solution = sdr_solution


class IndeterminateError(CobeamError):
    """The solver hit its iteration limit before producing either a
    solution or an infeasibility certificate."""
