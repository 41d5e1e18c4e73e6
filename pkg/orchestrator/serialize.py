"""Serialization utilities: JSON reports, MTCS dataset files, checkpoints, logs"""
import json
import re
from dataclasses import asdict, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
import yaml

from stages.datagen.category_shift import validate_assignment

from .errors import DataFormatError, InvalidAssignmentError
from .types import DatasetManifest, LabeledRecord, Split, TrainLogEntry

DATASET_HEADER = "MTCS v1"
CHECKPOINT_HEADER = "MTCS-CKPT v1"

_SIZES = re.compile(r"^T=(\d+) C=(\d+) D=(\d+)$")
_OBSERVED = re.compile(r"^task(\d+)_observed=(.*)$")

PathLike = Union[str, Path]


def _number(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------------- #
# JSON
# ---------------------------------------------------------------------- #
def save_json(obj: Any, filepath: PathLike) -> None:
    """Save object to JSON file, handling dataclasses, enums, arrays and pandas objects"""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)

    with open(filepath, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_serialize(obj), f, indent=2, default=str)
        f.write("\n")


def _serialize(obj: Any) -> Any:
    """Recursively serialize objects to JSON-compatible format"""
    if is_dataclass(obj):
        return {k: _serialize(v) for k, v in asdict(obj).items()}
    elif isinstance(obj, Enum):
        return obj.value
    elif isinstance(obj, pd.DataFrame):
        return _serialize(obj.to_dict(orient="records"))
    elif isinstance(obj, torch.Tensor):
        return obj.detach().cpu().tolist()
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, np.generic):
        return obj.item()
    elif isinstance(obj, (list, tuple)):
        return [_serialize(item) for item in obj]
    elif isinstance(obj, dict):
        return {str(k): _serialize(v) for k, v in obj.items()}
    else:
        return obj


# ---------------------------------------------------------------------- #
# Dataset files
# ---------------------------------------------------------------------- #
def format_dataset(manifest: DatasetManifest, records: Sequence[LabeledRecord]) -> str:
    lines = [
        DATASET_HEADER,
        f"T={manifest.num_tasks} C={manifest.num_classes} D={manifest.input_dim}",
        "classes=" + ",".join(manifest.class_names),
    ]
    for t, observed in enumerate(manifest.observed_classes):
        lines.append(f"task{t}_observed=" + ",".join(str(c) for c in sorted(observed)))
    for r in records:
        values = " ".join(_number(v) for v in r.features)
        lines.append(f"{r.task_id}\t{r.split.value}\t{r.class_id}\t{values}")
    return "\n".join(lines) + "\n"


def save_dataset(path: PathLike, manifest: DatasetManifest, records: Sequence[LabeledRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_dataset(manifest, records))


def parse_dataset(text: str) -> Tuple[DatasetManifest, List[LabeledRecord]]:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    if not lines or lines[0] != DATASET_HEADER:
        raise DataFormatError(f"expected header '{DATASET_HEADER}'", 1)
    match = _SIZES.match(lines[1]) if len(lines) > 1 else None
    if match is None:
        raise DataFormatError("expected 'T=<int> C=<int> D=<int>'", 2)
    T, C, D = (int(g) for g in match.groups())
    if T < 1 or C < 1 or D < 1:
        raise DataFormatError("T, C and D must be positive", 2)

    if len(lines) < 3 or not lines[2].startswith("classes="):
        raise DataFormatError("expected 'classes=<name0>,<name1>,...'", 3)
    class_names = tuple(lines[2][len("classes="):].split(","))
    if len(class_names) != C:
        raise DataFormatError(f"expected {C} class names, found {len(class_names)}", 3)

    observed: List[Tuple[int, ...]] = []
    for t in range(T):
        line_number = 4 + t
        line = lines[line_number - 1] if len(lines) >= line_number else ""
        match = _OBSERVED.match(line)
        if match is None or int(match.group(1)) != t:
            raise DataFormatError(f"expected 'task{t}_observed=<id,id,...>'", line_number)
        try:
            ids = tuple(int(tok) for tok in match.group(2).split(",") if tok != "")
        except ValueError as exc:
            raise DataFormatError(f"non-integer class id in task{t}_observed", line_number) from exc
        if not ids:
            raise DataFormatError(f"task{t}_observed lists no class", line_number)
        if len(set(ids)) != len(ids):
            raise DataFormatError(f"duplicate class id in task{t}_observed", line_number)
        if any(not 0 <= c < C for c in ids):
            raise DataFormatError(f"unknown class id in task{t}_observed", line_number)
        observed.append(tuple(sorted(ids)))
    try:
        validate_assignment(observed, T, C)
    except InvalidAssignmentError as exc:
        raise DataFormatError(str(exc), 3 + T) from exc

    manifest = DatasetManifest(T, C, D, class_names, tuple(observed))

    records: List[LabeledRecord] = []
    for offset, line in enumerate(lines[3 + T:]):
        line_number = 4 + T + offset
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataFormatError("expected 4 tab-separated fields", line_number)
        try:
            task_id, class_id = int(parts[0]), int(parts[2])
        except ValueError as exc:
            raise DataFormatError("task and class ids must be integers", line_number) from exc
        if not 0 <= task_id < T:
            raise DataFormatError(f"unknown task id {task_id}", line_number)
        if not 0 <= class_id < C:
            raise DataFormatError(f"unknown class id {class_id}", line_number)
        try:
            split = Split(parts[1])
        except ValueError as exc:
            raise DataFormatError(f"unknown split '{parts[1]}'", line_number) from exc
        tokens = parts[3].split(" ") if parts[3] else []
        if len(tokens) != D:
            raise DataFormatError(f"expected {D} features, found {len(tokens)}", line_number)
        try:
            features = tuple(float(tok) for tok in tokens)
        except ValueError as exc:
            raise DataFormatError("non-numeric feature value", line_number) from exc
        records.append(LabeledRecord(task_id, class_id, split, features))

    return manifest, records


def _read_text(path: PathLike) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return f.read()
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"'{path}' is not valid UTF-8 text (byte offset {exc.start})") from exc


def load_dataset(path: PathLike) -> Tuple[DatasetManifest, List[LabeledRecord]]:
    return parse_dataset(_read_text(path))


# ---------------------------------------------------------------------- #
# Checkpoints
# ---------------------------------------------------------------------- #
def save_checkpoint(path: PathLike, config: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> None:
    """
    Text container: header, a YAML config section, then one
    `tensor <name> <dims>` line followed by its flattened values per tensor.
    """
    lines = [CHECKPOINT_HEADER, "section config"]
    lines.extend(yaml.safe_dump(config, sort_keys=True, default_flow_style=False).rstrip("\n").split("\n"))
    lines.append(f"section tensors {len(tensors)}")
    for name, array in tensors.items():
        array = np.asarray(array, dtype=np.float64)
        dims = ",".join(str(n) for n in array.shape) or "scalar"
        lines.append(f"tensor {name} {dims}")
        lines.append(" ".join(_number(v) for v in array.ravel()))
    lines.append("end")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path: PathLike) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    lines = _read_text(path).split("\n")

    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise DataFormatError(f"expected header '{CHECKPOINT_HEADER}'", 1)
    if len(lines) < 2 or lines[1] != "section config":
        raise DataFormatError("expected 'section config'", 2)

    cursor = 2
    config_lines = []
    while cursor < len(lines) and not lines[cursor].startswith("section tensors"):
        config_lines.append(lines[cursor])
        cursor += 1
    if cursor >= len(lines):
        raise DataFormatError("missing 'section tensors'", cursor + 1)
    try:
        config = yaml.safe_load("\n".join(config_lines)) or {}
    except yaml.YAMLError as exc:
        raise DataFormatError(f"config section is not valid YAML: {exc}", 3) from exc
    if not isinstance(config, dict):
        raise DataFormatError("config section must be a YAML mapping", 3)

    try:
        count = int(lines[cursor].split()[2])
    except (IndexError, ValueError) as exc:
        raise DataFormatError("malformed tensor count", cursor + 1) from exc
    cursor += 1

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        header = lines[cursor].split(" ") if cursor < len(lines) else []
        if len(header) != 3 or header[0] != "tensor":
            raise DataFormatError("expected 'tensor <name> <dims>'", cursor + 1)
        name, dims = header[1], header[2]
        body = lines[cursor + 1] if cursor + 1 < len(lines) else ""
        try:
            shape = () if dims == "scalar" else tuple(int(n) for n in dims.split(","))
            values = [float(tok) for tok in body.split(" ")] if body else []
        except ValueError as exc:
            raise DataFormatError(f"tensor '{name}': {exc}", cursor + 1) from exc
        expected = int(np.prod(shape)) if shape else 1
        if len(values) != expected:
            raise DataFormatError(f"tensor '{name}' expects {expected} values", cursor + 2)
        tensors[name] = np.asarray(values, dtype=np.float64).reshape(shape)
        cursor += 2

    if cursor >= len(lines) or lines[cursor] != "end":
        raise DataFormatError("missing 'end' marker", cursor + 1)
    return config, tensors


# ---------------------------------------------------------------------- #
# Training logs and tables
# ---------------------------------------------------------------------- #
def training_log_frame(entries: Sequence[TrainLogEntry]) -> pd.DataFrame:
    frame = pd.DataFrame(
        [(e.iteration, e.ce, e.ae, e.total, e.avg_entropy) for e in entries],
        columns=["iter", "ce", "ae", "total", "avg_entropy"],
    )
    return frame


def save_training_log(path: PathLike, entries: Sequence[TrainLogEntry]) -> None:
    save_table(path, training_log_frame(entries))


def save_table(path: PathLike, frame: pd.DataFrame) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep="\t", index=False, float_format="%.10g", lineterminator="\n")
