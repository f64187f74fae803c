from uavafl.optimizer.gp import GPTransform, gp_transform, selector_matrix
from uavafl.optimizer.problem import ProblemSpec, build_problem, initial_selection
from uavafl.optimizer.solver import SubproblemSolution, convex_solve
from uavafl.optimizer.subproblems import (
    SelectionBlock,
    TrajectoryBlock,
    penalty,
    polish_amplitudes,
    slack_update,
)
from uavafl.optimizer.two_layer import (
    OptimizerState,
    SolveResult,
    round_and_repair,
    two_layer_solve,
)


def selection_subproblem(state, spec, block=None):
    """One selection-block solve at ``state`` (fixed trajectory and amplitudes)."""
    block = block or SelectionBlock(spec)
    return block.solve(state.A, state.Abar, state.B, state.Q, state.eta, state.y)


def trajectory_power_subproblem(state, spec, block=None):
    """One trajectory-block solve at ``state`` (fixed selection)."""
    block = block or TrajectoryBlock(spec)
    return block.solve(state.A, state.B, state.Q, state.y)


__all__ = [
    "GPTransform",
    "OptimizerState",
    "ProblemSpec",
    "SelectionBlock",
    "SolveResult",
    "SubproblemSolution",
    "TrajectoryBlock",
    "build_problem",
    "convex_solve",
    "gp_transform",
    "initial_selection",
    "penalty",
    "polish_amplitudes",
    "round_and_repair",
    "selection_subproblem",
    "selector_matrix",
    "slack_update",
    "trajectory_power_subproblem",
    "two_layer_solve",
]
