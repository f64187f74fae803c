"""UAV-assisted over-the-air asynchronous federated learning.

Simulation of the slot-level training loop, the over-the-air aggregation
chain and its error analytics, the convergence bound, and the two-layer
penalty/SCA optimizer for trajectory, device selection and transmit gains.
"""

from uavafl.errors import (
    ConfigurationError,
    InfeasibleProblemError,
    InfeasibleScheduleError,
    SchedulingViolation,
    ShapeError,
    SingularityError,
    SolverError,
    UavAflError,
)
from uavafl.scenario import DeviceSpec, Scenario, ScenarioParams, generate_scenario
from uavafl.schedule import Schedule

__all__ = [
    "ConfigurationError",
    "DeviceSpec",
    "InfeasibleProblemError",
    "InfeasibleScheduleError",
    "Scenario",
    "ScenarioParams",
    "Schedule",
    "SchedulingViolation",
    "ShapeError",
    "SingularityError",
    "SolverError",
    "UavAflError",
    "generate_scenario",
]

__version__ = "0.1.0"
