from .losses import (
    ObjectiveOutput,
    assignment_entropy,
    cross_entropy,
    forward_objective,
    gradient,
    total_loss,
)
from .gradcheck import GradCheckProblem, check_gradients, finite_difference_gradient, toy_problem

__all__ = [
    "ObjectiveOutput",
    "assignment_entropy",
    "cross_entropy",
    "forward_objective",
    "gradient",
    "total_loss",
    "GradCheckProblem",
    "check_gradients",
    "finite_difference_gradient",
    "toy_problem",
]
