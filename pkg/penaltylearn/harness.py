from __future__ import annotations

import concurrent.futures
import json
import math
import os
import pathlib
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Optional

import numpy
import pandas

import penaltylearn.const
import penaltylearn.utils
from penaltylearn.data import (
    FoldAssignment,
    LabelSet,
    SequenceSet,
    SyntheticConfig,
    assign_folds,
    generate_synthetic,
    labeled_ids,
    load_folds,
    load_labels,
    load_sequences,
)
from penaltylearn.errors import ConfigError, MetricError, PenaltyLearnError
from penaltylearn.features import FeaturePipeline, fit_pipeline
from penaltylearn.learn import ModelSpec, Models, TrainedModel, linear, mlp, mmit
from penaltylearn.learn.dataset import IntervalDataset
from penaltylearn.learn.loss import mean_squared_hinge
from penaltylearn.learn.optim import TrainingSettings
from penaltylearn.log import dbg, info, ok, warn
from penaltylearn.penaltypath import ErrorFunction, TargetInterval, error_functions, eval_errors_at, target_interval
from penaltylearn.settings import Settings

SELECTION_METRICS = ("accuracy", "hinge")


@dataclass
class ExperimentConfig:
    """Everything a cross-validation run depends on; JSON keys mirror the field names"""

    sequences: Optional[str] = None
    labels: Optional[str] = None
    folds_file: Optional[str] = None
    synthetic: Optional[dict[str, Any]] = None
    models: list[str] = field(default_factory=lambda: list(penaltylearn.const.MODEL_NAMES))
    folds: int = penaltylearn.const.DEFAULT_FOLDS
    seed: int = penaltylearn.const.DEFAULT_SEED
    kmax: int = penaltylearn.const.DEFAULT_KMAX
    margin: float = penaltylearn.const.DEFAULT_MARGIN
    learning_rate: float = penaltylearn.const.DEFAULT_LEARNING_RATE
    max_iterations: int = penaltylearn.const.DEFAULT_MAX_ITERATIONS
    patience: int = penaltylearn.const.DEFAULT_PATIENCE
    min_improvement: float = penaltylearn.const.DEFAULT_MIN_IMPROVEMENT
    mlp_layers: list[int] = field(default_factory=lambda: list(penaltylearn.const.MLP_LAYERS))
    mlp_widths: list[int] = field(default_factory=lambda: list(penaltylearn.const.MLP_WIDTHS))
    mmit_max_depth: list[int] = field(default_factory=lambda: list(penaltylearn.const.MMIT_MAX_DEPTHS))
    mmit_min_samples_split: list[int] = field(
        default_factory=lambda: list(penaltylearn.const.MMIT_MIN_SAMPLES_SPLITS)
    )
    mmit_margin: list[float] = field(default_factory=lambda: list(penaltylearn.const.MMIT_MARGINS))
    l1_grid: list[float] = field(default_factory=lambda: list(penaltylearn.const.L1_GRID))
    selection_metric: str = "accuracy"
    cache_dir: Optional[str] = None
    threads: int = 0
    record_timings: bool = False
    schema_version: int = penaltylearn.const.CONFIG_SCHEMA_VERSION

    def validate(self) -> None:
        """
        Raises:
            ConfigError: on any out-of-range or unknown value
        """
        if self.schema_version != penaltylearn.const.CONFIG_SCHEMA_VERSION:
            raise ConfigError(
                f"Unsupported config schema version {self.schema_version} "
                f"(expected {penaltylearn.const.CONFIG_SCHEMA_VERSION})"
            )
        if not self.models:
            raise ConfigError("At least one model is required")
        for name in self.models:
            Models.find(name)
        if self.folds < 2:
            raise ConfigError(f"Fold count must be at least 2 (got {self.folds})")
        if self.kmax < 1:
            raise ConfigError(f"kmax must be positive (got {self.kmax})")
        if self.margin < 0 or any(m < 0 for m in self.mmit_margin):
            raise ConfigError("Margins must be >= 0")
        if not (self.learning_rate > 0 and self.max_iterations >= 0 and self.patience >= 1):
            raise ConfigError("Invalid optimizer settings")
        if self.selection_metric not in SELECTION_METRICS:
            raise ConfigError(f"selection_metric must be one of {SELECTION_METRICS} (got '{self.selection_metric}')")
        for layers in self.mlp_layers:
            if not penaltylearn.const.MLP_MIN_LAYERS <= layers <= penaltylearn.const.MLP_MAX_LAYERS:
                raise ConfigError(f"Unsupported hidden layer count {layers}")
        for width in self.mlp_widths:
            if width not in penaltylearn.const.MLP_WIDTHS:
                raise ConfigError(f"Unsupported hidden width {width}")
        if not (self.mlp_layers and self.mlp_widths and self.l1_grid):
            raise ConfigError("Selection grids must not be empty")
        if not (self.mmit_max_depth and self.mmit_min_samples_split and self.mmit_margin):
            raise ConfigError("Selection grids must not be empty")
        if any(d < 0 for d in self.mmit_max_depth) or any(s < 2 for s in self.mmit_min_samples_split):
            raise ConfigError("Invalid tree hyperparameters")
        if any(not (math.isfinite(v) and v >= 0) for v in self.l1_grid):
            raise ConfigError("L1 strengths must be finite and >= 0")
        if self.threads < 0:
            raise ConfigError("threads must be >= 0")
        if self.synthetic is None and not (self.sequences and self.labels):
            raise ConfigError("Either 'synthetic' or both 'sequences' and 'labels' must be set")
        return

    @property
    def training(self) -> TrainingSettings:
        return TrainingSettings(
            self.learning_rate, self.max_iterations, self.patience, self.min_improvement, self.margin
        )

    def updated(self, **overrides: Any) -> ExperimentConfig:
        """Copy with the non-None `overrides` applied"""
        values = asdict(self)
        values |= {key: value for key, value in overrides.items() if value is not None}
        return ExperimentConfig.from_dict(values)

    @classmethod
    def from_settings(cls, settings: Settings) -> ExperimentConfig:
        """Defaults from the ini settings"""
        return cls(
            folds=settings.getint("Experiment", "folds", penaltylearn.const.DEFAULT_FOLDS),
            seed=settings.getint("Experiment", "seed", penaltylearn.const.DEFAULT_SEED),
            kmax=settings.getint("Segmentation", "kmax", penaltylearn.const.DEFAULT_KMAX),
            margin=settings.getfloat("Training", "margin", penaltylearn.const.DEFAULT_MARGIN),
            learning_rate=settings.getfloat("Training", "learning_rate", penaltylearn.const.DEFAULT_LEARNING_RATE),
            max_iterations=settings.getint("Training", "max_iterations", penaltylearn.const.DEFAULT_MAX_ITERATIONS),
            patience=settings.getint("Training", "patience", penaltylearn.const.DEFAULT_PATIENCE),
            min_improvement=settings.getfloat(
                "Training", "min_improvement", penaltylearn.const.DEFAULT_MIN_IMPROVEMENT
            ),
            selection_metric=settings.get("Experiment", "selection_metric", "accuracy"),
            threads=settings.getint("Experiment", "threads", 0),
            record_timings=settings.getboolean("Experiment", "record_timings", False),
        )

    @classmethod
    def from_dict(cls, values: dict[str, Any], base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
        """
        Raises:
            ConfigError: on unknown keys or values of the wrong type
        """
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
        merged = asdict(base) if base else {}
        merged |= values
        try:
            return cls(**merged)
        except TypeError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_json(cls, path: pathlib.Path, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
        """Load a JSON experiment file on top of `base`; relative data paths are resolved against the file's
        directory"""
        path = pathlib.Path(path)
        if not path.is_file():
            raise ConfigError(f"Configuration file '{path}' not found")
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Cannot parse '{path}': {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"'{path}' must contain a JSON object")

        for key in ("sequences", "labels", "folds_file", "cache_dir"):
            if isinstance(values.get(key), str) and not pathlib.Path(values[key]).is_absolute():
                values[key] = str(path.parent / values[key])
        return cls.from_dict(values, base)


@dataclass(frozen=True)
class Accuracy:
    percent: float
    fp: int
    fn: int
    labels: int


@dataclass
class CVResult:
    model: str
    fold: int
    accuracy: Optional[float] = None
    fp: Optional[int] = None
    fn: Optional[int] = None
    labels: Optional[int] = None
    chosen_config: dict[str, Any] = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def accuracy(predictions: dict[str, float], errfuns: dict[str, ErrorFunction]) -> Accuracy:
    """Label accuracy of predicted log(lambda) values, through the error function lookup

    Raises:
        MetricError: if a prediction has no error function, or no label is involved
    """
    fp = fn = labels = 0
    for sequence_id, loglam in sorted(predictions.items()):
        if sequence_id not in errfuns:
            raise MetricError(f"No error function for sequence '{sequence_id}'")
        err = errfuns[sequence_id]
        piece_fp, piece_fn = eval_errors_at(err, loglam)
        fp += piece_fp
        fn += piece_fn
        labels += err.n_labels

    if labels == 0:
        raise MetricError("Accuracy is undefined without labels")
    return Accuracy(100.0 * (labels - fp - fn) / labels, fp, fn, labels)


def task_seed(*coordinates: int | str) -> int:
    return int(penaltylearn.utils.seed_for(*coordinates).generate_state(1)[0])


def inner_split_seed(seed: int, fold: int) -> int:
    """Seed of the inner split of outer fold `fold`, shared by every model"""
    return task_seed(seed, fold)


def selection_grid(spec: ModelSpec, config: ExperimentConfig) -> list[dict[str, Any]]:
    """Candidate hyperparameters of a model, simplest first"""
    match spec.family:
        case "mlp":
            return [{"layers": n, "width": w} for n in sorted(config.mlp_layers) for w in sorted(config.mlp_widths)]
        case "mmit":
            return [
                {"max_depth": d, "min_samples_split": s, "margin": m}
                for d in sorted(config.mmit_max_depth)
                for s in sorted(config.mmit_min_samples_split)
                for m in sorted(config.mmit_margin)
            ]
        case "linear" if spec.feature_set == "full":
            return [{"l1": value} for value in sorted(config.l1_grid, reverse=True)]
        case "linear":
            return [{"l1": 0.0}]
        case _:
            return [{}]


def _dataset(
    pipeline: FeaturePipeline, sequences: SequenceSet, ids: list[str], targets: dict[str, TargetInterval]
) -> IntervalDataset:
    x = pipeline.transform(sequences, ids)
    return IntervalDataset.from_targets(x, [targets[sid] for sid in ids], pipeline.names, tuple(ids))


def _candidates(
    spec: ModelSpec,
    grid: list[dict[str, Any]],
    sequences: SequenceSet,
    ids: list[str],
    targets: dict[str, TargetInterval],
    config: ExperimentConfig,
    seed: int,
) -> list[TrainedModel]:
    """Train one model per grid point on `ids`, sharing the feature pipeline. Trees are grown once per
    (min_samples_split, margin) at the largest depth, then truncated."""
    if not spec.supervised:
        return [TrainedModel(spec) for _ in grid]

    pipeline = fit_pipeline(spec.feature_set, sequences, ids)
    data = _dataset(pipeline, sequences, ids, targets)
    settings = config.training
    trained: list[TrainedModel] = []
    grown: dict[tuple[int, float], mmit.TreeModel] = {}

    for hyper in grid:
        match spec.family:
            case "linear":
                estimator = linear.train_linear(data, hyper["l1"], settings, seed)
            case "mlp":
                estimator = mlp.train_mlp(data, hyper["layers"], hyper["width"], settings, seed)
            case "mmit":
                key = (hyper["min_samples_split"], hyper["margin"])
                if key not in grown:
                    depth = max(h["max_depth"] for h in grid)
                    grown[key] = mmit.train_mmit(data, depth, *key)
                estimator = grown[key].truncated(hyper["max_depth"])
            case _:
                raise ConfigError(f"Unsupported model family '{spec.family}'")
        margin = hyper["margin"] if spec.family == "mmit" else settings.margin
        trained.append(TrainedModel(spec, estimator, pipeline, dict(hyper), seed, margin))
    return trained


def _score(
    model: TrainedModel,
    sequences: SequenceSet,
    ids: list[str],
    errfuns: dict[str, ErrorFunction],
    targets: dict[str, TargetInterval],
    metric: str,
) -> float:
    """Validation score, higher is better"""
    predictions = model.predict(sequences, ids)
    if metric == "hinge":
        yhat = numpy.array([predictions[sid] for sid in ids])
        lower = numpy.array([targets[sid].lower for sid in ids])
        upper = numpy.array([targets[sid].upper for sid in ids])
        return -mean_squared_hinge(yhat, lower, upper, model.margin)
    return accuracy(predictions, {sid: errfuns[sid] for sid in ids}).percent


def select_config(
    spec: ModelSpec,
    sequences: SequenceSet,
    train_ids: list[str],
    errfuns: dict[str, ErrorFunction],
    targets: dict[str, TargetInterval],
    config: ExperimentConfig,
    seed: int,
    split_seed: Optional[int] = None,
) -> dict[str, Any]:
    """Pick hyperparameters by inner 2-fold cross-validation on the training sequences: the grid point with
    the best mean validation score wins, ties go to the earliest (simplest) one. The inner split is drawn
    from `split_seed` (default `seed`), candidate trainings from `seed`."""
    grid = selection_grid(spec, config)
    if len(grid) == 1:
        return grid[0]
    if len(train_ids) < 2 * penaltylearn.const.INNER_FOLDS:
        warn(f"{spec}: only {len(train_ids)} training sequences, using {grid[0]}")
        return grid[0]

    inner = assign_folds(train_ids, penaltylearn.const.INNER_FOLDS, seed if split_seed is None else split_seed)
    scores = numpy.zeros(len(grid))
    for fold in range(1, inner.k + 1):
        fit_ids, valid_ids = inner.split(fold)
        candidates = _candidates(spec, grid, sequences, fit_ids, targets, config, task_seed(seed, fold))
        scores += [_score(m, sequences, valid_ids, errfuns, targets, config.selection_metric) for m in candidates]
    scores /= inner.k

    best = int(numpy.flatnonzero(scores == scores.max())[0])
    dbg(f"{spec}: selected {grid[best]} (mean validation score {scores[best]:.6g})")
    return grid[best]


def select_mlp_config(
    sequences: SequenceSet,
    train_ids: list[str],
    errfuns: dict[str, ErrorFunction],
    targets: dict[str, TargetInterval],
    config: ExperimentConfig,
    seed: int,
    feature_set: str = "full",
) -> dict[str, Any]:
    return select_config(Models.find(f"mlp.{feature_set}"), sequences, train_ids, errfuns, targets, config, seed)


def fit_selected(
    spec: ModelSpec,
    sequences: SequenceSet,
    train_ids: list[str],
    errfuns: dict[str, ErrorFunction],
    targets: dict[str, TargetInterval],
    config: ExperimentConfig,
    seed: int,
    split_seed: Optional[int] = None,
) -> tuple[TrainedModel, dict[str, Any]]:
    """Select hyperparameters on `train_ids`, then refit on all of them

    Returns:
        tuple[TrainedModel, dict[str, Any]]: the model, and the chosen configuration (with the stop
        iteration of iterative learners)
    """
    hyper = select_config(spec, sequences, train_ids, errfuns, targets, config, seed, split_seed)
    model = _candidates(spec, [hyper], sequences, train_ids, targets, config, seed)[0]
    chosen = dict(hyper)
    history = getattr(model.estimator, "history", None)
    if history is not None:
        chosen["iterations"] = history.stop_iteration
    return model, chosen


def load_experiment_data(config: ExperimentConfig) -> tuple[SequenceSet, LabelSet]:
    if config.synthetic is not None:
        return generate_synthetic(SyntheticConfig.from_dict(config.synthetic), config.seed)
    assert config.sequences and config.labels
    sequences = load_sequences(pathlib.Path(config.sequences))
    return sequences, load_labels(pathlib.Path(config.labels), sequences)


def experiment_folds(config: ExperimentConfig, ids: list[str]) -> FoldAssignment:
    if config.folds_file:
        assignment = load_folds(pathlib.Path(config.folds_file))
        missing = sorted(set(ids) - set(assignment.folds))
        if missing:
            raise ConfigError(f"Sequences missing from the fold file: {', '.join(missing[:5])}")
        return FoldAssignment({sid: assignment.folds[sid] for sid in ids}, assignment.k)
    return assign_folds(ids, config.folds, config.seed)


def _run_task(
    spec: ModelSpec,
    fold: int,
    assignment: FoldAssignment,
    sequences: SequenceSet,
    errfuns: dict[str, ErrorFunction],
    targets: dict[str, TargetInterval],
    config: ExperimentConfig,
) -> CVResult:
    start = time.perf_counter()
    train_ids, test_ids = assignment.split(fold)
    result = CVResult(spec.name, fold)
    try:
        model, result.chosen_config = fit_selected(
            spec,
            sequences,
            train_ids,
            errfuns,
            targets,
            config,
            task_seed(config.seed, spec.name, fold),
            inner_split_seed(config.seed, fold),
        )
        score = accuracy(model.predict(sequences, test_ids), {sid: errfuns[sid] for sid in test_ids})
        result.accuracy, result.fp, result.fn, result.labels = score.percent, score.fp, score.fn, score.labels
    except PenaltyLearnError as e:
        result.error = str(e)
        warn(f"{spec} failed on fold {fold}: {e}")
    result.seconds = time.perf_counter() - start
    if not result.failed:
        info(f"{spec} fold {fold}: accuracy {result.accuracy:.2f}% ({result.fp} fp, {result.fn} fn)")
    return result


def run_cv(
    config: ExperimentConfig,
    sequences: Optional[SequenceSet] = None,
    labels: Optional[LabelSet] = None,
) -> list[CVResult]:
    """Outer K-fold cross-validation of every configured model

    Args:
        config (ExperimentConfig): the experiment
        sequences (Optional[SequenceSet], optional): the data, loaded from `config` if None
        labels (Optional[LabelSet], optional): the labels, loaded from `config` if None

    Raises:
        ConfigError: on invalid configuration or folds

    Returns:
        list[CVResult]: one row per (model, fold), in configuration order then fold order
    """
    config.validate()
    if sequences is None or labels is None:
        sequences, labels = load_experiment_data(config)

    ids = labeled_ids(sequences, labels)
    assignment = experiment_folds(config, ids)
    info(f"Cross-validating {len(config.models)} model(s) on {len(ids)} sequences, {assignment.k} folds")

    cache_dir = pathlib.Path(config.cache_dir) if config.cache_dir else None
    errfuns = error_functions(sequences, {sid: labels[sid] for sid in ids}, config.kmax, cache_dir)
    targets = {sid: target_interval(err) for sid, err in errfuns.items()}

    specs = [Models.find(name) for name in config.models]
    coordinates = [(spec, fold) for spec in specs for fold in range(1, assignment.k + 1)]
    workers = config.threads or os.cpu_count() or 1
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_run_task, spec, fold, assignment, sequences, errfuns, targets, config)
            for spec, fold in coordinates
        ]
        results = [future.result() for future in futures]

    ok(f"Cross-validation done: {len(results)} result rows")
    return results


def report(results: list[CVResult]) -> pandas.DataFrame:
    """Median and interquartile range of the fold accuracies of each model; failed folds are excluded"""
    rows = []
    for model in dict.fromkeys(r.model for r in results):
        scores = [r.accuracy for r in results if r.model == model and not r.failed]
        if len(scores) < sum(1 for r in results if r.model == model):
            warn(f"{model}: failed folds excluded from the summary")
        if not scores:
            rows.append((model, math.nan, math.nan, math.nan))
            continue
        q25, median, q75 = penaltylearn.utils.quantiles(scores, [0.25, 0.5, 0.75])
        rows.append((model, median, q25, q75))
    return pandas.DataFrame(rows, columns=list(penaltylearn.const.SUMMARY_COLUMNS))


def results_frame(results: list[CVResult], record_timings: bool = False) -> pandas.DataFrame:
    rows = []
    for r in results:
        chosen = dict(r.chosen_config)
        if r.failed:
            chosen["error"] = r.error
        rows.append(
            (
                r.model,
                r.fold,
                r.accuracy,
                r.fp,
                r.fn,
                r.labels,
                json.dumps(chosen, sort_keys=True, separators=(",", ":")),
                r.seconds if record_timings else None,
            )
        )
    df = pandas.DataFrame(rows, columns=list(penaltylearn.const.RESULTS_COLUMNS))
    for column in ("fp", "fn", "labels"):
        df[column] = df[column].astype("Int64")
    return df


def write_results(path: pathlib.Path, results: list[CVResult], record_timings: bool = False) -> None:
    penaltylearn.utils.write_csv(path, results_frame(results, record_timings))
    return


def read_results(path: pathlib.Path) -> list[CVResult]:
    df = penaltylearn.utils.read_csv(path, penaltylearn.const.RESULTS_COLUMNS, dtypes={"model": str})
    results = []
    for row in df.itertuples(index=False):
        chosen = json.loads(row.chosen_config) if isinstance(row.chosen_config, str) else {}
        error = chosen.pop("error", None)
        results.append(
            CVResult(
                str(row.model),
                int(row.fold),
                None if pandas.isna(row.accuracy) else float(row.accuracy),
                None if pandas.isna(row.fp) else int(row.fp),
                None if pandas.isna(row.fn) else int(row.fn),
                None if pandas.isna(row.labels) else int(row.labels),
                chosen,
                0.0 if pandas.isna(row.seconds) else float(row.seconds),
                error,
            )
        )
    return results


def write_summary(path: pathlib.Path, summary: pandas.DataFrame) -> None:
    penaltylearn.utils.write_csv(path, summary)
    return
