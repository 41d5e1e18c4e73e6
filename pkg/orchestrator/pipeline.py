import logging
import os
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import yaml

from .errors import ConfigurationError, ExperimentError, NumericalError, ShapeError
from .serialize import load_dataset, save_dataset, save_json, save_table, save_training_log
from .sweep import SweepRunner, parse_vary
from .types import Method, RunResult, RunStatus, Split, SplitConfig, SynthConfig, TrainConfig
from stages.datagen.benchmark_assignments import benchmark_observed
from stages.datagen.category_shift import apply_category_shift, load_assignment, missing_rate, random_assignment
from stages.datagen.synth_generator import generate_synthetic, summarize_records
from stages.evaluation.evaluator import Evaluator
from stages.objective.gradcheck import check_gradients, toy_problem
from stages.training.checkpoint import read_checkpoint, write_checkpoint
from stages.training.trainer import AssociationGraphTrainer

Outcome = Tuple[Dict[str, str], List[str]]

_SECTIONS = ("experiment", "synth", "split", "train", "paths", "logging")
_PATH_KEYS = ("artifacts_path", "output_path")
_LOGGING_KEYS = ("level", "format", "file")


class ExperimentPipeline:
    """
    Orchestrates the category-shift experiments: one method per CLI
    command, each returning a RunResult instead of raising.
    """

    def __init__(self, config_path: str, seed: Optional[int] = None):
        self.config_path = config_path
        self.config = self._load_config()
        self.synth_config = SynthConfig.from_dict(self.config.get("synth"))
        self.split_config = SplitConfig.from_dict(self.config.get("split"))
        self.train_config = TrainConfig.from_dict(self.config.get("train"))
        if seed is not None:
            self._override_seed(seed)
        self._setup_logging()
        self.logger = logging.getLogger(self.__class__.__name__)

    def _load_config(self) -> Dict[str, Any]:
        """Load configuration from YAML file"""
        if not os.path.exists(self.config_path):
            raise ConfigurationError(f"Configuration file not found: {self.config_path}")
        with open(self.config_path, "r", encoding="utf-8") as file:
            try:
                config = yaml.safe_load(file) or {}
            except yaml.YAMLError as exc:
                raise ConfigurationError(f"{self.config_path} is not valid YAML: {exc}") from exc
        if not isinstance(config, dict):
            raise ConfigurationError(f"{self.config_path} must hold a mapping of sections")

        unknown = sorted(set(config) - set(_SECTIONS))
        if unknown:
            raise ConfigurationError(f"Unknown configuration sections: {unknown}")
        for section, allowed in (("paths", _PATH_KEYS), ("logging", _LOGGING_KEYS)):
            extra = sorted(set(config.get(section) or {}) - set(allowed))
            if extra:
                raise ConfigurationError(f"Unknown keys in '{section}': {extra}")
        return config

    def _override_seed(self, seed: int) -> None:
        self.synth_config = replace(self.synth_config, seed=seed)
        self.split_config = replace(self.split_config, seed=seed)
        self.train_config = replace(self.train_config, seed=seed)

    def _setup_logging(self):
        """Setup logging configuration"""
        log_config = self.config.get("logging") or {}
        level = getattr(logging, str(log_config.get("level", "INFO")).upper(), logging.INFO)

        artifacts_path = self.paths["artifacts_path"]
        os.makedirs(artifacts_path, exist_ok=True)

        logging.basicConfig(
            level=level,
            format=log_config.get("format", "%(asctime)s - %(name)s - %(levelname)s - %(message)s"),
            handlers=[
                logging.FileHandler(log_config.get("file", os.path.join(artifacts_path, "experiment.log"))),
                logging.StreamHandler(),
            ],
        )

    @property
    def paths(self) -> Dict[str, str]:
        paths = self.config.get("paths") or {}
        return {
            "artifacts_path": paths.get("artifacts_path", "artifacts"),
            "output_path": paths.get("output_path", "outputs"),
        }

    def _output(self, path: Optional[str], default_name: str) -> str:
        return path or os.path.join(self.paths["output_path"], default_name)

    def document(self) -> Dict[str, Dict[str, Any]]:
        """Resolved synth / split / train sections, seed overrides applied"""
        return {
            "synth": self.synth_config.to_dict(),
            "split": self.split_config.to_dict(),
            "train": self.train_config.to_dict(),
        }

    # ------------------------------------------------------------------ #
    # Command execution
    # ------------------------------------------------------------------ #
    def _execute(self, command: str, action: Callable[[], Outcome]) -> RunResult:
        start_time = time.time()
        self.logger.info(f"Starting '{command}'")
        try:
            outputs, messages = action()
        except ExperimentError as e:
            self.logger.error(f"'{command}' failed: {e}")
            return RunResult(RunStatus.FAILED, command, {}, time.time() - start_time, [str(e)], e.exit_code)
        except OSError as e:
            self.logger.error(f"'{command}' failed: {e}")
            return RunResult(RunStatus.FAILED, command, {}, time.time() - start_time, [str(e)], 1)

        execution_time = time.time() - start_time
        self.logger.info(f"'{command}' completed in {execution_time:.2f} seconds")
        return RunResult(RunStatus.COMPLETED, command, outputs, execution_time, [], 0, messages)

    def cmd_generate(self, out_path: Optional[str] = None) -> RunResult:
        def action() -> Outcome:
            manifest, records = generate_synthetic(self.synth_config)
            path = self._output(out_path, "dataset.mtcs")
            save_dataset(path, manifest, records)

            counts = summarize_records(records)
            per_split = counts.groupby("split")["count"].sum()
            pairs = len(counts[["task", "class"]].drop_duplicates())
            messages = [
                f"wrote {len(records)} records to {path}",
                f"train={int(per_split.get(Split.TRAIN.value, 0))} test={int(per_split.get(Split.TEST.value, 0))} "
                f"(task, class) pairs={pairs}",
            ]
            return {"dataset": path}, messages

        return self._execute("generate", action)

    def cmd_split(
        self,
        in_path: str,
        out_path: Optional[str] = None,
        rate: Optional[float] = None,
        assignment_path: Optional[str] = None,
        benchmark: Optional[str] = None,
    ) -> RunResult:
        def action() -> Outcome:
            manifest, records = load_dataset(in_path)
            if rate is not None and assignment_path is not None:
                raise ConfigurationError("give either a missing rate or an assignment file, not both")
            if benchmark is not None and assignment_path is not None:
                raise ConfigurationError("give either a benchmark or an assignment file, not both")
            source, table = assignment_path, benchmark
            if rate is None and source is None and table is None:
                source, table = self.split_config.assignment, self.split_config.benchmark
            chosen = self.split_config.missing_rate if rate is None else rate
            if source:
                assignment = load_assignment(source, manifest)
            elif table:
                assignment = benchmark_observed(table, chosen, manifest)
            else:
                assignment = random_assignment(
                    manifest.num_tasks, manifest.num_classes, chosen, self.split_config.seed
                )
            shifted, kept = apply_category_shift(manifest, records, assignment)

            path = self._output(out_path, "shifted.mtcs")
            save_dataset(path, shifted, kept)
            gamma = missing_rate(shifted)
            return {"dataset": path}, [f"gamma = {gamma:.6f}", f"wrote {len(kept)} records to {path}"]

        return self._execute("split", action)

    def cmd_train(self, dataset_path: str, out_path: Optional[str] = None, method: Optional[str] = None) -> RunResult:
        def action() -> Outcome:
            manifest, records = load_dataset(dataset_path)
            config = self.train_config if method is None else replace(self.train_config, method=Method(method).value)
            result = AssociationGraphTrainer(config).train(manifest, records)

            path = self._output(out_path, f"{config.method}.ckpt")
            log_path = str(Path(path).with_suffix(".log.tsv"))
            write_checkpoint(path, result)
            save_training_log(log_path, result.log)

            messages = [f"checkpoint {path}", f"training log {log_path}"]
            if result.log:
                last = result.log[-1]
                messages.append(f"final ce={last.ce:.6f} ae={last.ae:.6f} total={last.total:.6f}")
            return {"checkpoint": path, "log": log_path}, messages

        return self._execute("train", action)

    def cmd_eval(self, checkpoint_path: str, dataset_path: str, out_path: Optional[str] = None) -> RunResult:
        def action() -> Outcome:
            trained = read_checkpoint(checkpoint_path)
            manifest, records = load_dataset(dataset_path)
            expected = (trained.manifest.num_tasks, trained.manifest.num_classes, trained.manifest.input_dim)
            found = (manifest.num_tasks, manifest.num_classes, manifest.input_dim)
            if expected != found:
                raise ShapeError(f"checkpoint expects (T, C, D) = {expected}, dataset has {found}")

            config = replace(trained.config, refresh_nodes_before_eval=self.train_config.refresh_nodes_before_eval)
            report = Evaluator(config).evaluate(trained.params, trained.bank, manifest, records)

            path = self._output(out_path, "report.json")
            summary_path = str(Path(path).with_suffix(".tsv"))
            save_json(report.to_document(), path)
            header = "gamma\tA_m\tA_o\tH\tavg_assignment_entropy"
            with open(summary_path, "w", encoding="utf-8", newline="\n") as f:
                f.write(header + "\n" + report.summary_line() + "\n")
            return {"report": path, "summary": summary_path}, [header, report.summary_line()]

        return self._execute("eval", action)

    def cmd_gradcheck(self) -> RunResult:
        def action() -> Outcome:
            synth = self.synth_config
            problem = toy_problem(self.train_config, synth.num_tasks, synth.num_classes, synth.input_dim, synth.seed)
            report = check_gradients(problem.params, problem.bank, problem.batch, problem.config, problem.manifest)
            verdict = "PASS" if report.passed else "FAIL"
            line = f"max relative error {report.max_relative_error:.3e} over {report.num_parameters} parameters"
            if not report.passed:
                raise NumericalError(f"{line}: FAIL", report.worst_parameter)
            return {}, [line, verdict]

        return self._execute("gradcheck", action)

    def cmd_sweep(
        self,
        vary: Sequence[str],
        seeds: int = 5,
        workers: int = 1,
        out_path: Optional[str] = None,
    ) -> RunResult:
        def action() -> Outcome:
            if seeds < 1:
                raise ConfigurationError("--seeds must be >= 1")
            parsed = [parse_vary(text) for text in vary]
            base = self.train_config.seed
            table = SweepRunner(self.document(), workers).run(parsed, [base + i for i in range(seeds)])

            path = self._output(out_path, "sweep.tsv")
            save_table(path, table)
            rendered = table.to_csv(sep="\t", index=False, lineterminator="\n").rstrip("\n").split("\n")
            return {"table": path}, rendered

        return self._execute("sweep", action)

    def get_pipeline_status(self) -> Dict[str, Any]:
        """Get current experiment configuration status"""
        experiment = self.config.get("experiment") or {}
        return {
            "experiment_name": experiment.get("name", "category-shift"),
            "version": experiment.get("version", "-"),
            "sections": self.document(),
            "data_paths": self.paths,
        }


def status_frame(status: Dict[str, Any]) -> pd.DataFrame:
    """Flat (section, key, value) view of a pipeline status"""
    rows = [
        (section, key, value)
        for section, values in status["sections"].items()
        for key, value in values.items()
    ]
    return pd.DataFrame(rows, columns=["section", "key", "value"])
