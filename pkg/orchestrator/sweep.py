"""
Multi-seed ablation sweeps: the cross product of varied settings, each
cell trained and evaluated on freshly generated and shifted synthetic data.
"""
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from stages.datagen.benchmark_assignments import benchmark_observed
from stages.datagen.category_shift import apply_category_shift, load_assignment, random_assignment
from stages.datagen.synth_generator import generate_synthetic
from stages.evaluation.evaluator import Evaluator
from stages.training.trainer import train

from .errors import ConfigurationError
from .types import SplitConfig, SynthConfig, TrainConfig

logger = logging.getLogger(__name__)

METRICS = ("A_m", "A_o", "H", "avg_assignment_entropy")


def _section_keys(cls) -> Dict[str, str]:
    keys = {f.name: f.name for f in fields(cls)}
    keys.update(cls.ALIASES)
    return keys


_ROUTES: Dict[str, Dict[str, str]] = {
    "train": _section_keys(TrainConfig),
    "synth": _section_keys(SynthConfig),
    "split": _section_keys(SplitConfig),
}


def route_key(key: str) -> Tuple[str, str]:
    """Section and canonical field name of a --vary key"""
    if key == "seed":
        raise ConfigurationError("vary seeds with --seeds, not --vary seed")
    for section, keys in _ROUTES.items():
        if key in keys:
            return section, keys[key]
    raise ConfigurationError(f"Unknown sweep key '{key}'")


def parse_vary(text: str) -> Tuple[str, List[Any]]:
    """'L=0,1,2,4' -> ('L', [0, 1, 2, 4]); values are read as YAML scalars"""
    if "=" not in text:
        raise ConfigurationError(f"--vary expects key=v1,v2,..., got '{text}'")
    key, _, raw = text.partition("=")
    key = key.strip()
    values = [yaml.safe_load(token.strip()) for token in raw.split(",") if token.strip()]
    if not values:
        raise ConfigurationError(f"--vary '{key}' lists no values")
    route_key(key)
    return key, values


def cell_configs(
    document: Dict[str, Dict[str, Any]], overrides: Dict[str, Any], seed: int
) -> Tuple[SynthConfig, SplitConfig, TrainConfig]:
    sections = {name: dict(document.get(name) or {}) for name in _ROUTES}
    for key, value in overrides.items():
        section, name = route_key(key)
        for alias, target in _ROUTES[section].items():
            if target == name:
                sections[section].pop(alias, None)
        sections[section][name] = value
    for name in _ROUTES:
        sections[name]["seed"] = seed
    return (
        SynthConfig.from_dict(sections["synth"]),
        SplitConfig.from_dict(sections["split"]),
        TrainConfig.from_dict(sections["train"]),
    )


def run_cell(document: Dict[str, Dict[str, Any]], overrides: Dict[str, Any], seed: int) -> Dict[str, Optional[float]]:
    """Generate, shift, train and evaluate one (setting, seed) cell"""
    synth, split, train_config = cell_configs(document, overrides, seed)
    manifest, records = generate_synthetic(synth)
    if split.assignment:
        assignment = load_assignment(split.assignment, manifest)
    elif split.benchmark:
        assignment = benchmark_observed(split.benchmark, split.missing_rate, manifest)
    else:
        assignment = random_assignment(manifest.num_tasks, manifest.num_classes, split.missing_rate, split.seed)
    manifest, records = apply_category_shift(manifest, records, assignment)

    result = train(manifest, records, train_config)
    report = Evaluator(train_config).evaluate(result.params, result.bank, manifest, records)
    return {
        "A_m": report.missing_accuracy,
        "A_o": report.observed_accuracy,
        "H": report.harmonic_mean,
        "avg_assignment_entropy": report.avg_assignment_entropy,
    }


def _run_job(job: Tuple[Dict[str, Any], Dict[str, Any], int]) -> Dict[str, Optional[float]]:
    return run_cell(*job)


def _mean_sd(values: Sequence[Optional[float]]) -> Tuple[Optional[float], Optional[float], int]:
    """Mean, sample sd (None below two values) and count of the present values"""
    series = pd.Series([v for v in values if v is not None], dtype="float64")
    if series.empty:
        return None, None, 0
    sd = float(series.std(ddof=1)) if series.size > 1 else None
    return float(series.mean()), sd, int(series.size)


def _format(mean: Optional[float], sd: Optional[float]) -> str:
    if mean is None:
        return "-"
    spread = "-" if sd is None else f"{sd:.2f}"
    return f"{mean:.2f}±{spread}"


class SweepRunner:
    """Runs every cell of a sweep and folds the per-seed metrics into one table"""

    def __init__(self, document: Dict[str, Dict[str, Any]], workers: int = 1):
        self.document = document
        self.workers = max(1, int(workers))
        self.logger = logging.getLogger(self.__class__.__name__)

    def run(self, vary: Sequence[Tuple[str, List[Any]]], seeds: Sequence[int]) -> pd.DataFrame:
        keys = [key for key, _ in vary]
        settings = [dict(zip(keys, combo)) for combo in itertools.product(*(values for _, values in vary))]
        jobs = [(self.document, setting, seed) for setting in settings for seed in seeds]
        self.logger.info(f"🔁 Sweep over {len(settings)} settings x {len(seeds)} seeds ({self.workers} workers)")

        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                outcomes = list(pool.map(_run_job, jobs))
        else:
            outcomes = [_run_job(job) for job in jobs]

        rows = []
        for i, setting in enumerate(settings):
            cell = outcomes[i * len(seeds):(i + 1) * len(seeds)]
            row: Dict[str, Any] = {key: setting[key] for key in keys}
            for metric in METRICS:
                mean, sd, n = _mean_sd([o[metric] for o in cell])
                row[metric] = _format(mean, sd)
                if metric == "H":
                    ci = 1.96 * sd / math.sqrt(n) if sd is not None else None
                    row["H_ci95"] = "-" if ci is None else f"{ci:.2f}"
            row["seeds"] = len(seeds)
            rows.append(row)
            self.logger.info(f"{setting}: H={row['H']}")

        columns = keys + ["A_m", "A_o", "H", "avg_assignment_entropy", "H_ci95", "seeds"]
        return pd.DataFrame(rows, columns=columns)
