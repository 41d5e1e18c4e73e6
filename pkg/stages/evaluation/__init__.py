from .evaluator import Evaluator, average_assignment_entropy, evaluate, harmonic_mean, predict, predict_batch

__all__ = ["Evaluator", "average_assignment_entropy", "evaluate", "harmonic_mean", "predict", "predict_batch"]
