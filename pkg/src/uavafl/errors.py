"""Exception hierarchy shared by every module."""


class UavAflError(Exception):
    """Base class; ``code`` is the machine-readable token used by the CLI."""

    code = "error"


class ConfigurationError(UavAflError, ValueError):
    code = "configuration_error"


class ShapeError(UavAflError, ValueError):
    code = "shape_error"


class SingularityError(UavAflError, ValueError):
    code = "singularity_error"


class SchedulingViolation(UavAflError, RuntimeError):
    """A device was selected while busy or without a cached gradient."""

    code = "scheduling_violation"


class InfeasibleScheduleError(UavAflError, ValueError):
    """A schedule breaks a staleness, busy, power or mechanics constraint."""

    code = "infeasible_schedule"

    def __init__(self, message: str, violation=None):
        super().__init__(message)
        self.violation = violation


class InfeasibleProblemError(UavAflError, ValueError):
    code = "infeasible_problem"


class SolverError(UavAflError, RuntimeError):
    """Convex solver failed; ``diagnostics`` carries residuals and status."""

    code = "solver_error"

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
