from uavafl.afl.constants import AssumptionConstants, estimate_assumption_constants
from uavafl.afl.engine import (
    DeviceRuntime,
    ErrorBreakdown,
    ModelState,
    SlotMetrics,
    TrainingEngine,
    run_training,
)
from uavafl.afl.hierarchical import run_hierarchical_training
from uavafl.afl.history import TrainingHistory
from uavafl.afl.tasks import (
    LearningTask,
    LogisticTask,
    QuadraticTask,
    make_logistic_task,
    make_quadratic_task,
)

__all__ = [
    "AssumptionConstants",
    "DeviceRuntime",
    "ErrorBreakdown",
    "LearningTask",
    "LogisticTask",
    "ModelState",
    "QuadraticTask",
    "SlotMetrics",
    "TrainingEngine",
    "TrainingHistory",
    "estimate_assumption_constants",
    "make_logistic_task",
    "make_quadratic_task",
    "run_hierarchical_training",
    "run_training",
]
