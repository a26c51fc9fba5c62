"""Exception types shared across the package."""


class BlowupLabError(Exception):
    """Base class for all package errors."""


class InvalidMeshError(BlowupLabError):
    """Mesh construction parameters are unusable."""


class InvalidPartitionError(BlowupLabError):
    """Boundary partition violates the Gamma0/Gamma1 requirements."""


class ConstraintError(BlowupLabError):
    """A field violates the Gamma0 zero-trace constraint."""


class UndefinedScaleError(BlowupLabError):
    """Nehari rescaling is undefined (zero field)."""


class InsufficientDataError(BlowupLabError):
    """Trajectory too short for the requested audit."""


class ConvergenceError(BlowupLabError):
    """Iterative estimator failed to converge."""

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class SolverError(BlowupLabError):
    """Linear solve did not reach the required residual."""


class NotApplicableError(BlowupLabError):
    """A bound formula's hypotheses do not hold for this input."""


class InconclusiveEstimateError(BlowupLabError):
    """Blow-up time extrapolation cannot be performed on this tail."""


class PlacementError(BlowupLabError):
    """Initial-data subdomain placement is invalid for the mesh."""


class ConstructionError(BlowupLabError):
    """Energy-level construction failed to reach the target."""


class ConfigError(BlowupLabError):
    """Run configuration is invalid."""
