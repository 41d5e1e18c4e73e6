"""Observed-class assignments, the missing rate, and train-split filtering"""
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import yaml

from orchestrator.errors import (
    ConfigurationError,
    DataFormatError,
    InfeasibleAssignmentError,
    InvalidAssignmentError,
)
from orchestrator.types import DatasetManifest, LabeledRecord, Split

logger = logging.getLogger(__name__)

Assignment = Tuple[Tuple[int, ...], ...]


def validate_assignment(assignment: Sequence[Sequence[int]], num_tasks: int, num_classes: int) -> Assignment:
    if len(assignment) != num_tasks:
        raise InvalidAssignmentError(
            f"Assignment lists {len(assignment)} tasks, manifest declares {num_tasks}"
        )
    normalized = []
    covered = set()
    for t, observed in enumerate(assignment):
        classes = sorted(set(int(c) for c in observed))
        if not classes:
            raise InvalidAssignmentError(f"Task {t} observes no class")
        bad = [c for c in classes if not 0 <= c < num_classes]
        if bad:
            raise InvalidAssignmentError(f"Task {t} lists class ids outside [0, {num_classes}): {bad}")
        covered.update(classes)
        normalized.append(tuple(classes))
    uncovered = sorted(set(range(num_classes)) - covered)
    if uncovered:
        raise InvalidAssignmentError(
            f"Union of observed classes misses {uncovered}; every class must be observed by some task"
        )
    return tuple(normalized)


def missing_rate(manifest: DatasetManifest) -> float:
    """Average fraction of the label space each task never sees in training"""
    T, C = manifest.num_tasks, manifest.num_classes
    missing = sum(C - len(observed) for observed in manifest.observed_classes)
    # single division of exact integers keeps e.g. 0.75 and 2/3 exact
    return missing / (T * C)


def apply_category_shift(
    manifest: DatasetManifest,
    records: Sequence[LabeledRecord],
    assignment: Sequence[Sequence[int]],
) -> Tuple[DatasetManifest, List[LabeledRecord]]:
    observed = validate_assignment(assignment, manifest.num_tasks, manifest.num_classes)
    observed_sets = [set(s) for s in observed]
    kept = [
        r for r in records
        if r.split is not Split.TRAIN or r.class_id in observed_sets[r.task_id]
    ]
    shifted = manifest.with_observed(observed)
    logger.info(
        f"Category shift removed {len(records) - len(kept)} train records; "
        f"gamma={missing_rate(shifted):.4f}"
    )
    return shifted, kept


def random_assignment(num_tasks: int, num_classes: int, rate: float, seed: int) -> Assignment:
    """
    Each task observes exactly round(C * (1 - rate)) classes drawn at random.
    Uncovered classes are swapped in for an over-covered class of the
    lowest-id task holding one, so counts stay equal and the union is [0, C).
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"missing_rate must lie in [0, 1), got {rate}")
    per_task = int(round(num_classes * (1.0 - rate)))
    if per_task < 1:
        raise InfeasibleAssignmentError(
            f"missing_rate={rate} leaves no observed class out of {num_classes}"
        )
    if per_task * num_tasks < num_classes:
        raise InfeasibleAssignmentError(
            f"{num_tasks} tasks x {per_task} observed classes cannot cover {num_classes} classes"
        )

    rng = np.random.default_rng(seed)
    observed: List[List[int]] = [
        sorted(int(c) for c in rng.choice(num_classes, size=per_task, replace=False))
        for _ in range(num_tasks)
    ]

    coverage = np.zeros(num_classes, dtype=np.int64)
    for classes in observed:
        coverage[classes] += 1

    for missing in np.flatnonzero(coverage == 0):
        for t, classes in enumerate(observed):
            donors = [c for c in classes if coverage[c] >= 2]
            if not donors:
                continue
            # most-covered donor first, lowest id on ties
            donor = min(donors, key=lambda c: (-coverage[c], c))
            classes.remove(donor)
            classes.append(int(missing))
            classes.sort()
            coverage[donor] -= 1
            coverage[missing] += 1
            break

    return validate_assignment(observed, num_tasks, num_classes)


def assignment_from_names(
    observed_names: Sequence[Sequence[Union[int, str]]], class_names: Sequence[str]
) -> List[List[int]]:
    index = {name: i for i, name in enumerate(class_names)}
    resolved = []
    for t, entries in enumerate(observed_names):
        ids = []
        for entry in entries:
            if isinstance(entry, int) and not isinstance(entry, bool):
                ids.append(entry)
            elif str(entry) in index:
                ids.append(index[str(entry)])
            else:
                raise InvalidAssignmentError(f"Task {t}: unknown class '{entry}'")
        resolved.append(ids)
    return resolved


def load_assignment(path: Union[str, Path], manifest: DatasetManifest) -> Assignment:
    """
    YAML file of the form
        observed:
          0: [keyboard, laptop_computer]
          1: [2, 6, 7]
    Class names and integer ids may be mixed.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle) or {}
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"Assignment file '{path}' is not valid UTF-8 text") from exc
    except yaml.YAMLError as exc:
        raise DataFormatError(f"Assignment file '{path}' is not valid YAML: {exc}") from exc
    if not isinstance(document, dict) or not isinstance(document.get("observed"), dict):
        raise DataFormatError(f"Assignment file '{path}' needs an 'observed' mapping")
    mapping = document["observed"]
    try:
        ordered = [mapping[t] for t in range(manifest.num_tasks)]
    except KeyError as exc:
        raise InvalidAssignmentError(f"Assignment file '{path}' has no entry for task {exc}") from exc
    ids = assignment_from_names(ordered, manifest.class_names)
    return validate_assignment(ids, manifest.num_tasks, manifest.num_classes)
