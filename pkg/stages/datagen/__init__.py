# Synthetic data, category shifts, dataset helpers
from .synth_generator import SyntheticDataGenerator, generate_synthetic, records_to_arrays, summarize_records
from .benchmark_assignments import BENCHMARKS, benchmark_assignment, benchmark_observed
from .category_shift import (
    apply_category_shift,
    assignment_from_names,
    load_assignment,
    missing_rate,
    random_assignment,
    validate_assignment,
)

__all__ = [
    "BENCHMARKS",
    "benchmark_assignment",
    "benchmark_observed",
    "SyntheticDataGenerator",
    "generate_synthetic",
    "records_to_arrays",
    "summarize_records",
    "apply_category_shift",
    "assignment_from_names",
    "load_assignment",
    "missing_rate",
    "random_assignment",
    "validate_assignment",
]
